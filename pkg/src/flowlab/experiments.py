"""Experiment runners behind the CLI subcommands.

Each runner takes a parsed ExperimentConfig, performs its runs with fully
seeded randomness, writes `report.txt` / `report.tsv` into the output
directory, and returns the Report (whose verdicts drive the exit code)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .autoencoder import (
    Decoder,
    DecoderConfig,
    DecoderTrainConfig,
    FrozenEncoder,
    NoiseAugConfig,
    train_decoder,
)
from .config import ExperimentConfig, serialize_config
from .data import ingest_images, make_toy_dataset, read_image_dataset, write_image_dataset
from .errors import ConfigError, DataError
from .flow import ScheduleShift, effective_dim
from .metrics import FeatureMap, balanced_labels, fit_moments, frechet_distance, uniform_labels
from .model import DiT, HeadConfig, ModelConfig, heads_for_width, preset_config
from .report import Report
from .rng import Rng
from .sampling import GuidanceConfig, SamplerConfig, generate
from .spectral import (
    SpectralSummary,
    covariance_eigenvalues,
    explicit_projection_residual,
    inference_deviation_bound,
    kyfan_projection_residual,
    training_loss_lower_bound,
)
from .theory import WidthBoundSettings, verify_width_bound
from .train import TrainConfig, TrainState, eval_weights, train_flow_model
from .theory import delta_latent  # noqa: F401  (re-exported for scripts)


# -- shared assembly ----------------------------------------------------------


def model_config_from(cfg: ExperimentConfig) -> ModelConfig:
    m = cfg.model
    head = HeadConfig(depth=m.head.depth, width=m.head.width) if m.head.enabled else None
    if m.width:
        return ModelConfig(
            dim=m.width,
            num_heads=m.heads or heads_for_width(m.width),
            depth=m.depth or 4,
            token_dim=m.token_dim,
            num_tokens=m.num_tokens,
            label_count=m.label_count,
            head=head,
        )
    return preset_config(
        m.preset, token_dim=m.token_dim, num_tokens=m.num_tokens,
        label_count=m.label_count, head=head,
    )


def train_config_from(cfg: ExperimentConfig) -> TrainConfig:
    o = cfg.optim
    return TrainConfig(
        steps=cfg.train.steps,
        batch_size=cfg.train.batch,
        lr=o.lr,
        lr_schedule=o.schedule,
        lr_min=o.lr_min,
        warmup_steps=o.warmup_steps,
        beta1=o.beta1,
        beta2=o.beta2,
        weight_decay=o.weight_decay,
        grad_clip=o.grad_clip,
        ema_beta=o.ema if o.ema_enabled else 0.0,
        label_dropout=cfg.model.label_dropout,
    )


def shift_from(cfg: ExperimentConfig) -> ScheduleShift | None:
    s = cfg.flow.shift
    if not s.enabled:
        return None
    m = s.m or effective_dim(cfg.model.num_tokens, cfg.model.token_dim)
    return ScheduleShift(m=m, n_base=s.n_base)


def encoder_from(cfg: ExperimentConfig) -> FrozenEncoder:
    return FrozenEncoder(
        patch_size=cfg.rae.enc_patch, token_dim=cfg.rae.token_dim, seed=cfg.rae.enc_seed
    )


def decoder_config_from(cfg: ExperimentConfig, num_tokens: int) -> DecoderConfig:
    return DecoderConfig(
        token_dim=cfg.rae.token_dim,
        num_tokens=num_tokens,
        patch_size=cfg.rae.dec_patch,
        width=cfg.rae.dec_width,
        depth=cfg.rae.dec_depth,
        num_heads=cfg.rae.dec_heads,
        upsample_head=cfg.rae.upsample_head,
    )


def decoder_train_config_from(cfg: ExperimentConfig) -> DecoderTrainConfig:
    return DecoderTrainConfig(
        steps=cfg.rae.steps,
        batch_size=cfg.rae.batch,
        lr=cfg.rae.lr,
        lr_min=cfg.rae.lr_min,
        perceptual_start_step=cfg.rae.perceptual_start_step,
        adversarial_start_step=cfg.rae.adversarial_start_step,
    )


def load_dataset(cfg: ExperimentConfig, seed: int, stream: int) -> tuple[np.ndarray, np.ndarray]:
    """Procedural dataset per seed, or an on-disk dataset when a path is set
    (labels then cycle through the configured class count)."""
    if cfg.data.path:
        images = read_image_dataset(cfg.data.path)
        labels = np.arange(images.shape[0], dtype=np.int64) % cfg.data.classes
        return images, labels
    return make_toy_dataset(
        Rng(seed, stream),
        num_classes=cfg.data.classes,
        per_class=cfg.data.per_class,
        image_size=cfg.data.image_size,
    )


def feature_map_from(cfg: ExperimentConfig) -> FeatureMap:
    shape = (3, cfg.data.image_size, cfg.data.image_size)
    return FeatureMap(image_shape=shape, k=cfg.metrics.feature_dim, seed=cfg.metrics.feature_seed)


@dataclass
class PipelineArtifacts:
    """One trained generation stack, reusable across report sections."""

    encoder: FrozenEncoder
    decoder: Decoder
    model: DiT
    weak_model: DiT | None
    state: TrainState
    shift: ScheduleShift | None


def train_pipeline_stack(
    cfg: ExperimentConfig,
    seed: int,
    shift: ScheduleShift | None,
    tau: float | None = None,
) -> tuple[PipelineArtifacts, np.ndarray, np.ndarray]:
    """Dataset -> frozen encode -> decoder training -> velocity model
    training. Returns artifacts plus the (images, labels) it trained on."""
    images, labels = load_dataset(cfg, seed, stream=1)
    encoder = encoder_from(cfg)
    latents = encoder.encode(images)
    decoder = Decoder(decoder_config_from(cfg, latents.shape[1]), Rng(seed + 50, 0))
    tau_value = cfg.rae.tau if tau is None else tau
    train_decoder(
        images, encoder, decoder, NoiseAugConfig(tau=tau_value),
        decoder_train_config_from(cfg), seed=seed + 60,
    )
    model_cfg = model_config_from(cfg)
    if model_cfg.num_tokens != latents.shape[1] or model_cfg.token_dim != latents.shape[2]:
        raise ConfigError(
            f"model grid {model_cfg.num_tokens}x{model_cfg.token_dim} does not match "
            f"latents {latents.shape[1]}x{latents.shape[2]}"
        )
    model = DiT(model_cfg, Rng(seed + 70, 0))
    train_cfg = train_config_from(cfg)
    early_step = max(1, int(round(cfg.pipeline.early_fraction * train_cfg.steps)))
    state, early = train_flow_model(
        model, latents, labels, train_cfg, seed=seed + 80, shift=shift,
        snapshot_step=early_step,
    )
    model.load_state(eval_weights(state))
    weak_model = None
    if early is not None:
        weak_model = DiT(model_cfg, Rng(seed + 70, 0))
        weak_model.load_state(early)
    artifacts = PipelineArtifacts(
        encoder=encoder, decoder=decoder, model=model,
        weak_model=weak_model, state=state, shift=shift,
    )
    return artifacts, images, labels


def score_generation(
    cfg: ExperimentConfig,
    artifacts: PipelineArtifacts,
    labels: np.ndarray,
    feature_map: FeatureMap,
    ref_moments,
    guidance: GuidanceConfig,
    seed: int,
    use_shift_grid: bool = True,
) -> float:
    shift = artifacts.shift if (cfg.sampler.shift_grid and use_shift_grid) else None
    sampler = SamplerConfig(steps=cfg.sampler.steps, shift=shift)
    images = generate(
        artifacts.model, artifacts.decoder, labels, sampler, guidance,
        seed=seed, weak_model=artifacts.weak_model,
        batch_size=cfg.pipeline.sample_batch,
    )
    return frechet_distance(fit_moments(feature_map(images)), ref_moments)


# -- experiment kinds ----------------------------------------------------------


def run_overfit_sweep(cfg: ExperimentConfig, out_dir: str) -> Report:
    t = cfg.theory
    settings = WidthBoundSettings(
        token_dim=t.token_dim, num_tokens=t.num_tokens, widths=tuple(t.widths),
        depths=tuple(t.depths), steps=t.steps, batch_size=t.batch, lr=t.lr,
        num_targets=t.targets, seeds_per_target=t.seeds_per_target,
        target_scale=t.target_scale, final_window=t.final_window,
        tol_under=t.tol_under, tol_over=t.tol_over, tol_wide=t.tol_wide,
        base_seed=cfg.seeds[0],
    )
    result = verify_width_bound(settings)
    report = Report(
        "width-bound overfit sweep",
        ["n", "d", "depth", "seed", "bound", "final_loss", "verdict"],
    )
    report.add_header("config", "")
    for line in serialize_config(cfg).strip().splitlines():
        report.add_header("cfg." + line.split(" = ")[0], line.split(" = ", 1)[1])
    for cell in result.cells:
        for run in cell.runs:
            report.add_row(
                run.token_dim, run.width, run.depth, run.seed,
                round(run.bound, 6), round(run.final_loss, 6),
                "PASS" if run.undershoot_ok else "FAIL",
            )
        report.add_row(
            cell.token_dim, cell.width, cell.depth, "avg",
            round(cell.bound, 6), round(cell.mean_final_loss, 6), cell.verdict,
        )
        report.add_verdict(f"width {cell.width} depth {cell.depth}", cell.verdict == "PASS")
    report.write(out_dir)
    return report


def run_verify_theory(cfg: ExperimentConfig, out_dir: str) -> Report:
    """Spectral-oracle verification: analytic covariance cases, the dual-route
    projection residual, bound monotonicity, and the deviation-bound table."""
    report = Report(
        "spectral oracle verification",
        ["case", "quantity", "value", "expected", "tolerance", "verdict"],
    )
    seed = cfg.seeds[0]
    n, m_samples = 8, 100_000
    rng = Rng(seed, 3)

    def check(case, quantity, value, expected, tol):
        ok = abs(value - expected) <= tol
        report.add_row(case, quantity, round(value, 8), round(expected, 8), tol, "PASS" if ok else "FAIL")
        return ok

    all_ok = True
    # case 1: point mass -> Cov(eps - x0) = I
    x0 = rng.standard_normal((n,), np.float64)
    w = rng.standard_normal((m_samples, n), np.float64) - x0
    spec1 = covariance_eigenvalues(w)
    all_ok &= check("point-mass", "max |lambda - 1|", float(np.abs(spec1.eigenvalues - 1).max()), 0.0, 0.02)
    # case 2: x ~ N(0, I) -> Cov = 2I
    w2 = rng.standard_normal((m_samples, n), np.float64) - rng.standard_normal((m_samples, n), np.float64)
    spec2 = covariance_eigenvalues(w2)
    all_ok &= check("gaussian", "max |lambda - 2|/2", float(np.abs(spec2.eigenvalues - 2).max() / 2), 0.0, 0.02)
    # case 3: rank-1 data x = s*u -> spectrum {1 + var(s), 1, ...}
    u = np.zeros(n)
    u[0] = 1.0
    s = rng.standard_normal((m_samples, 1), np.float64)
    w3 = rng.standard_normal((m_samples, n), np.float64) - s * u
    spec3 = covariance_eigenvalues(w3)
    expected3 = np.ones(n)
    expected3[0] = 2.0
    all_ok &= check(
        "rank-1", "max rel eigenvalue err",
        float(np.max(np.abs(spec3.eigenvalues - expected3) / expected3)), 0.0, 0.02,
    )
    # dual-route projection residual
    mix = rng.standard_normal((4000, n), np.float64) @ rng.standard_normal((n, n), np.float64)
    for d in (0, n // 2, n):
        lhs = kyfan_projection_residual(mix, d)
        rhs = explicit_projection_residual(mix, d)
        denom = max(1.0, abs(lhs))
        all_ok &= check(f"kyfan d={d}", "spectral vs explicit", (lhs - rhs) / denom, 0.0, 1e-6)
    # bound monotonicity in d
    bounds = [training_loss_lower_bound(spec3, d) for d in range(n + 1)]
    mono = all(b1 >= b2 - 1e-12 for b1, b2 in zip(bounds, bounds[1:]))
    report.add_row("bound", "nonincreasing in width", float(mono), 1.0, 0.0, "PASS" if mono else "FAIL")
    all_ok &= mono
    # deviation-bound factor table (user-supplied Lipschitz constants)
    for lipschitz in (1e-8, 1.0, 4.0):
        value = inference_deviation_bound(spec1, n // 2, lipschitz)
        factor = -np.expm1(-lipschitz) / lipschitz
        expected = factor * training_loss_lower_bound(spec1, n // 2)
        all_ok &= check(f"deviation L={lipschitz}", "bound", value, float(expected), 1e-9)
    report.add_verdict("spectral oracle suite", bool(all_ok))
    report.write(out_dir)
    return report


def run_noiseaug_ablation(cfg: ExperimentConfig, out_dir: str) -> Report:
    """Noise-augmented decoder directions: tau > 0 must win on perturbed
    latents and lose on clean ones, per seed majority."""
    report = Report(
        "noise-augmented decoding ablation",
        ["seed", "tau", "clean_l1", "perturbed_l1"],
    )
    report.add_header("perturbation sigma", 0.5)
    report.add_header("tau_on", cfg.rae.tau)
    encoder = encoder_from(cfg)
    clean_wins = 0
    perturbed_wins = 0
    for seed in cfg.seeds:
        images, _ = load_dataset(cfg, seed, stream=1)
        eval_images, _ = make_toy_dataset(
            Rng(seed, 99), num_classes=cfg.data.classes,
            per_class=max(2, cfg.data.per_class // 6), image_size=cfg.data.image_size,
        )
        lat_eval = encoder.encode(eval_images)
        perturbed = lat_eval + 0.5 * Rng(seed, 7).standard_normal(lat_eval.shape, np.float32)
        scores = {}
        for tau in (0.0, cfg.rae.tau):
            decoder = Decoder(decoder_config_from(cfg, lat_eval.shape[1]), Rng(seed + 100, 0))
            train_decoder(
                images, encoder, decoder, NoiseAugConfig(tau=tau),
                decoder_train_config_from(cfg), seed=seed + 110,
            )
            clean = float(np.mean(np.abs(decoder.decode_arrays(lat_eval) - eval_images)))
            noisy = float(np.mean(np.abs(decoder.decode_arrays(perturbed) - eval_images)))
            scores[tau] = (clean, noisy)
            report.add_row(seed, tau, round(clean, 6), round(noisy, 6))
        clean_wins += scores[0.0][0] < scores[cfg.rae.tau][0]
        perturbed_wins += scores[cfg.rae.tau][1] < scores[0.0][1]
    need = len(cfg.seeds) - 1 if len(cfg.seeds) > 1 else 1
    report.add_header("clean wins for tau=0", clean_wins)
    report.add_header("perturbed wins for tau>0", perturbed_wins)
    report.add_verdict(f"tau=0 better on clean latents in >= {need} seeds", clean_wins >= need)
    report.add_verdict(f"tau>0 better on perturbed latents in >= {need} seeds", perturbed_wins >= need)
    report.write(out_dir)
    return report


def run_schedule_ablation(cfg: ExperimentConfig, out_dir: str) -> Report:
    """Shifted versus unshifted training at a fixed budget, scored by the
    generation Fréchet proxy against held-out reference moments."""
    shift = shift_from(cfg)
    if shift is None:
        raise ConfigError("schedule_ablation requires flow.shift.enabled = true")
    report = Report(
        "schedule-shift ablation",
        ["seed", "arm", "alpha", "frechet", "final_train_loss"],
    )
    report.add_header("alpha", shift.alpha)
    report.add_header("ema", f"{cfg.optim.ema_enabled} (beta={cfg.optim.ema})")
    fm = feature_map_from(cfg)
    wins = 0
    for seed in cfg.seeds:
        ref_images, _ = make_toy_dataset(
            Rng(seed, 2), num_classes=cfg.data.classes,
            per_class=cfg.data.ref_per_class, image_size=cfg.data.image_size,
        )
        ref_moments = fit_moments(fm(ref_images))
        plan = balanced_labels(cfg.data.classes, cfg.pipeline.gen_per_class)
        scores = {}
        for arm, arm_shift in (("unshifted", None), ("shifted", shift)):
            artifacts, _, _ = train_pipeline_stack(cfg, seed, arm_shift)
            score = score_generation(
                cfg, artifacts, plan.labels, fm, ref_moments,
                GuidanceConfig(mode="none"), seed=seed + 90,
            )
            final_loss = float(np.mean(artifacts.state.loss_history[-50:]))
            scores[arm] = score
            report.add_row(seed, arm, round(arm_shift.alpha if arm_shift else 1.0, 6),
                           round(score, 6), round(final_loss, 6))
            tag = f"{arm}_seed{seed}"
            save_stack_checkpoint(Path(out_dir) / f"{tag}.ckpt", artifacts, cfg)
        wins += scores["shifted"] < scores["unshifted"]
    need = len(cfg.seeds) - 1 if len(cfg.seeds) > 1 else 1
    report.add_header("shifted wins", wins)
    report.add_verdict(f"shifted beats unshifted in >= {need} of {len(cfg.seeds)} seeds", wins >= need)
    report.write(out_dir)
    return report


def run_pipeline(cfg: ExperimentConfig, out_dir: str) -> Report:
    """End-to-end single-seed run: decoder, velocity model, generation with
    and without guidance, scored under both label plans."""
    seed = cfg.seeds[0]
    shift = shift_from(cfg)
    report = Report(
        "generation pipeline",
        ["section", "label_plan", "guidance", "frechet"],
    )
    report.add_header("ema", f"{cfg.optim.ema_enabled} (beta={cfg.optim.ema})")
    report.add_header("alpha", shift.alpha if shift else 1.0)
    fm = feature_map_from(cfg)
    artifacts, images, labels = train_pipeline_stack(cfg, seed, shift)
    ref_images, _ = make_toy_dataset(
        Rng(seed, 2), num_classes=cfg.data.classes,
        per_class=cfg.data.ref_per_class, image_size=cfg.data.image_size,
    )
    ref_moments = fit_moments(fm(ref_images))
    plans = {
        "balanced": balanced_labels(cfg.data.classes, cfg.pipeline.gen_per_class),
        "uniform": uniform_labels(
            cfg.data.classes, cfg.data.classes * cfg.pipeline.gen_per_class, Rng(seed, 4)
        ),
    }
    guided_cfg = GuidanceConfig(
        mode=cfg.guidance.mode if cfg.guidance.mode != "none" else "autoguidance",
        scale=cfg.guidance.scale, t_lo=cfg.guidance.t_lo, t_hi=cfg.guidance.t_hi,
    )
    scores = {}
    for plan_name, plan in plans.items():
        unguided = score_generation(
            cfg, artifacts, plan.labels, fm, ref_moments,
            GuidanceConfig(mode="none"), seed=seed + 90,
        )
        guided = score_generation(
            cfg, artifacts, plan.labels, fm, ref_moments, guided_cfg, seed=seed + 90,
        )
        scores[plan_name] = (unguided, guided)
        report.add_row("generation", plan_name, "none", round(unguided, 6))
        report.add_row("generation", plan_name, guided_cfg.mode, round(guided, 6))
    report.add_header("plan gap (unguided balanced - uniform)",
                      round(scores["balanced"][0] - scores["uniform"][0], 6))
    report.add_verdict(
        "guided beats unguided (balanced plan)",
        scores["balanced"][1] < scores["balanced"][0],
    )
    save_stack_checkpoint(Path(out_dir) / "pipeline.ckpt", artifacts, cfg)
    report.write(out_dir)
    return report


def save_stack_checkpoint(path: Path, artifacts: PipelineArtifacts, cfg: ExperimentConfig) -> None:
    state = artifacts.state
    tensors = ckpt.state_checkpoint_tensors(
        state.flat.arrays(),
        state.ema_arrays(),
        {"flat": state.adam.first_moment.get("flat", np.zeros(0, np.float32))},
        {"flat": state.adam.second_moment.get("flat", np.zeros(0, np.float32))},
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save_checkpoint(path, tensors, step=state.step, config_text=serialize_config(cfg))


def run_generate(cfg: ExperimentConfig, out_dir: str) -> Report:
    """Load a pipeline checkpoint and emit a dataset of generated images."""
    if not cfg.run.checkpoint:
        raise ConfigError("generate requires run.checkpoint = <path to pipeline checkpoint>")
    seed = cfg.seeds[0]
    tensors, step, _ = ckpt.load_checkpoint(cfg.run.checkpoint)
    params, ema, _, _ = ckpt.split_checkpoint_tensors(tensors)
    model = DiT(model_config_from(cfg), Rng(seed + 70, 0))
    weights = ema if ema else params
    model.load_state(_match_flat(weights, model))
    images, _ = load_dataset(cfg, seed, stream=1)
    encoder = encoder_from(cfg)
    latents = encoder.encode(images)
    decoder = Decoder(decoder_config_from(cfg, latents.shape[1]), Rng(seed + 50, 0))
    train_decoder(
        images, encoder, decoder, NoiseAugConfig(tau=cfg.rae.tau),
        decoder_train_config_from(cfg), seed=seed + 60,
    )
    plan = balanced_labels(cfg.data.classes, cfg.pipeline.gen_per_class)
    sampler = SamplerConfig(
        steps=cfg.sampler.steps, shift=shift_from(cfg) if cfg.sampler.shift_grid else None
    )
    guidance = GuidanceConfig(
        mode=cfg.guidance.mode, scale=cfg.guidance.scale,
        t_lo=cfg.guidance.t_lo, t_hi=cfg.guidance.t_hi,
    )
    out_images = generate(
        model, decoder, plan.labels, sampler, guidance, seed=seed + 90,
        batch_size=cfg.pipeline.sample_batch,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_image_dataset(out / "generated.bin", np.clip(out_images, 0.0, 1.0))
    report = Report("generation", ["quantity", "value"])
    report.add_header("ema", "true" if ema else "false")
    report.add_row("checkpoint_step", step)
    report.add_row("images", len(plan.labels))
    report.add_row("output", str(out / "generated.bin"))
    report.write(out_dir)
    return report


def _match_flat(weights: dict[str, np.ndarray], model: DiT) -> dict[str, np.ndarray]:
    """Checkpoint stacks may store one flat buffer; re-split it per parameter."""
    if set(weights) != {"flat"}:
        return weights
    from .optim import FlatParams

    flat = FlatParams(model.named_parameters())
    if weights["flat"].size != flat.flat.size:
        raise DataError(
            f"flat checkpoint has {weights['flat'].size} scalars, model needs {flat.flat.size}"
        )
    return flat.unflatten(weights["flat"].reshape(-1))


def run_metrics(cfg: ExperimentConfig, out_dir: str) -> Report:
    """Fréchet proxy between two datasets, plus the label-plan demonstration."""
    report = Report("metrics", ["quantity", "value"])
    fm = feature_map_from(cfg)
    if cfg.metrics.dataset_a and cfg.metrics.dataset_b:
        a = read_image_dataset(cfg.metrics.dataset_a)
        b = read_image_dataset(cfg.metrics.dataset_b)
        dist = frechet_distance(fit_moments(fm(a)), fit_moments(fm(b)))
        report.add_row("frechet(dataset_a, dataset_b)", round(dist, 6))
    else:
        seed = cfg.seeds[0]
        a, _ = make_toy_dataset(Rng(seed, 2), cfg.data.classes, cfg.data.ref_per_class,
                                cfg.data.image_size)
        b, _ = make_toy_dataset(Rng(seed, 3), cfg.data.classes, cfg.data.ref_per_class,
                                cfg.data.image_size)
        dist = frechet_distance(fit_moments(fm(a)), fit_moments(fm(b)))
        report.add_row("frechet(toy ref A, toy ref B)", round(dist, 6))
    balanced = balanced_labels(cfg.data.classes, cfg.pipeline.gen_per_class)
    uniform = uniform_labels(
        cfg.data.classes, len(balanced.labels), Rng(cfg.seeds[0], 4)
    )
    report.add_row("balanced plan size", len(balanced.labels))
    report.add_row("balanced count spread", int(np.ptp(balanced.counts(cfg.data.classes))))
    report.add_row("uniform count spread", int(np.ptp(uniform.counts(cfg.data.classes))))
    report.write(out_dir)
    return report


def run_convert_data(cfg: ExperimentConfig, out_dir: str) -> Report:
    if not cfg.convert.src:
        raise ConfigError("convert_data requires convert.src = <path>")
    dst = Path(out_dir) / cfg.convert.dst
    dst.parent.mkdir(parents=True, exist_ok=True)
    count = ingest_images(cfg.convert.src, dst)
    report = Report("convert-data", ["quantity", "value"])
    report.add_row("images", count)
    report.add_row("output", str(dst))
    report.write(out_dir)
    return report


RUNNERS = {
    "overfit_sweep": run_overfit_sweep,
    "verify_theory": run_verify_theory,
    "noiseaug_ablation": run_noiseaug_ablation,
    "schedule_ablation": run_schedule_ablation,
    "pipeline": run_pipeline,
    "generate": run_generate,
    "metrics": run_metrics,
    "convert_data": run_convert_data,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> Report:
    runner = RUNNERS.get(cfg.experiment)
    if runner is None:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    return runner(cfg, out_dir or cfg.out)
