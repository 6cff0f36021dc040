"""Synthetic corpora: preprocessing-style logs plus precomputed feature tables.

The generator plants class-conditional feature values with a tunable effect
size, writes log files in the grammar the default rule set parses, and keeps
a ground-truth CSV of the values it printed (at printed precision) so
extraction can be verified as an exact round trip. A second, distribution-
shifted corpus can be generated to exercise unseen-study evaluation.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path


from ._rng import substream
from .errors import ConfigError
from .ioutil import format_number, write_csv, write_json_atomic
from .log_miner import default_rules
from .store import GROUP_FLAGQC, GROUP_MRIQC_FUNCTIONAL, GROUP_MRIQC_STRUCTURAL

_STEPS = (
    "despike", "tshift", "skullstrip", "volreg", "align", "warp",
    "blur", "mask", "scale", "regress", "segment", "snapshot",
)

# kind: "runtime" (integer seconds via timestamps), "count" (Poisson),
# "gauss" (float printed with 6 significant digits)
_FLAGQC_MODEL = {
    "runtime_despike": ("runtime", 45.0, 10.0),
    "runtime_tshift": ("runtime", 30.0, 8.0),
    "runtime_skullstrip": ("runtime", 180.0, 40.0),
    "runtime_volreg": ("runtime", 120.0, 25.0),
    "runtime_align": ("runtime", 240.0, 50.0),
    "runtime_warp": ("runtime", 300.0, 60.0),
    "runtime_blur": ("runtime", 60.0, 15.0),
    "runtime_mask": ("runtime", 25.0, 6.0),
    "runtime_scale": ("runtime", 40.0, 10.0),
    "runtime_regress": ("runtime", 350.0, 70.0),
    "runtime_segment": ("runtime", 400.0, 80.0),
    "runtime_snapshot": ("runtime", 15.0, 4.0),
    "input_voxel_count": ("count", 212294.0, None),
    "despike_edited_voxels": ("count", 15230.0, None),
    "skullstrip_mask_voxels": ("count", 140235.0, None),
    "volreg_grid_voxels": ("count", 90262.0, None),
    "align_overlap_voxels": ("count", 81120.0, None),
    "warp_grid_voxels": ("count", 184322.0, None),
    "blur_smoothed_voxels": ("count", 89841.0, None),
    "union_mask_voxels": ("count", 61984.0, None),
    "intersect_mask_voxels": ("count", 54122.0, None),
    "scale_applied_voxels": ("count", 61984.0, None),
    "gray_matter_voxels": ("count", 41230.0, None),
    "white_matter_voxels": ("count", 38540.0, None),
    "bbox_x_min": ("gauss", -85.0, 3.0),
    "bbox_x_max": ("gauss", 86.0, 3.0),
    "bbox_y_min": ("gauss", -104.0, 4.0),
    "bbox_y_max": ("gauss", 68.0, 4.0),
    "bbox_z_min": ("gauss", -58.0, 4.0),
    "bbox_z_max": ("gauss", 74.0, 4.0),
    "align_cost": ("gauss", 0.23, 0.06),
    "censored_fraction": ("gauss", 0.04, 0.02),
    "mean_motion_mm": ("gauss", 0.12, 0.05),
    "max_displacement_mm": ("gauss", 1.8, 0.6),
    "smoothness_fwhm_mm": ("gauss", 7.2, 1.2),
    "temporal_snr": ("gauss", 60.0, 12.0),
    "outlier_fraction": ("gauss", 0.012, 0.006),
    "warp_rms_error": ("gauss", 2.3, 0.8),
}

# content line for each non-runtime feature: (step or "header", template)
_LINE_TEMPLATES = {
    "input_voxel_count": ("header", "++ input dataset: {v} voxels"),
    "despike_edited_voxels": ("despike", "++ despike: edited {v} voxels"),
    "outlier_fraction": ("despike", "++ despike: outlier fraction = {v}"),
    "skullstrip_mask_voxels": ("skullstrip", "++ skullstrip: brain mask contains {v} voxels"),
    "volreg_grid_voxels": ("volreg", "++ volreg: output grid contains {v} voxels"),
    "mean_motion_mm": ("volreg", "++ volreg: mean motion = {v} mm"),
    "max_displacement_mm": ("volreg", "++ volreg: max displacement = {v} mm"),
    "align_overlap_voxels": ("align", "++ align: overlap region contains {v} voxels"),
    "align_cost": ("align", "++ final cost = {v}"),
    "warp_grid_voxels": ("warp", "++ warp: template grid contains {v} voxels"),
    "blur_smoothed_voxels": ("blur", "++ blur: smoothed {v} voxels"),
    "smoothness_fwhm_mm": ("blur", "++ blur: estimated FWHM = {v} mm"),
    "union_mask_voxels": ("mask", "++ mask: union mask contains {v} voxels"),
    "intersect_mask_voxels": ("mask", "++ mask: intersect mask contains {v} voxels"),
    "scale_applied_voxels": ("scale", "++ scale: scaled {v} voxels"),
    "temporal_snr": ("scale", "++ scale: median tSNR = {v}"),
    "censored_fraction": ("regress", "++ regress: censored fraction = {v}"),
    "gray_matter_voxels": ("segment", "++ segment: gray matter {v} voxels"),
    "white_matter_voxels": ("segment", "++ segment: white matter {v} voxels"),
}
_BBOX_AXES = {"x": ("bbox_x_min", "bbox_x_max"), "y": ("bbox_y_min", "bbox_y_max"),
              "z": ("bbox_z_min", "bbox_z_max")}

# IQM-style column names, prefixed by modality so the two tables merge
# without collisions (44 functional, 68 structural).
MRIQC_FUNCTIONAL_COLUMNS = tuple(
    "bold_" + name
    for name in (
        "fd_mean", "fd_num", "fd_perc", "dvars_nstd", "dvars_std", "dvars_vstd",
        "gcor", "tsnr", "snr", "fber", "efc", "fwhm_avg", "fwhm_x", "fwhm_y",
        "fwhm_z", "gsr_x", "gsr_y", "aor", "aqi", "dummy_trs", "size_t", "size_x",
        "size_y", "size_z", "spacing_tr", "spacing_x", "spacing_y", "spacing_z",
        "summary_bg_mean", "summary_bg_stdv", "summary_bg_median", "summary_bg_mad",
        "summary_bg_p05", "summary_bg_p95", "summary_fg_mean", "summary_fg_stdv",
        "summary_fg_median", "summary_fg_mad", "summary_fg_p05", "summary_fg_p95",
        "tsnr_stdv", "ghost_ratio", "carpet_var", "outlier_count",
    )
)

MRIQC_STRUCTURAL_COLUMNS = tuple(
    "t1w_" + name
    for name in (
        "cjv", "cnr", "efc", "fber", "wm2max", "qi_1", "qi_2", "snr_csf", "snr_gm",
        "snr_wm", "snr_total", "snrd_csf", "snrd_gm", "snrd_wm", "snrd_total",
        "fwhm_avg", "fwhm_x", "fwhm_y", "fwhm_z", "icvs_csf", "icvs_gm", "icvs_wm",
        "rpve_csf", "rpve_gm", "rpve_wm", "inu_med", "inu_range", "tpm_overlap_csf",
        "tpm_overlap_gm", "tpm_overlap_wm", "summary_bg_mean", "summary_bg_stdv",
        "summary_bg_median", "summary_bg_mad", "summary_bg_p05", "summary_bg_p95",
        "summary_csf_mean", "summary_csf_stdv", "summary_csf_median",
        "summary_csf_mad", "summary_csf_p05", "summary_csf_p95", "summary_gm_mean",
        "summary_gm_stdv", "summary_gm_median", "summary_gm_mad", "summary_gm_p05",
        "summary_gm_p95", "summary_wm_mean", "summary_wm_stdv", "summary_wm_median",
        "summary_wm_mad", "summary_wm_p05", "summary_wm_p95", "size_x", "size_y",
        "size_z", "spacing_x", "spacing_y", "spacing_z", "volume_csf", "volume_gm",
        "volume_wm", "volume_total", "overlap_brainmask", "laplacian_var",
        "gradient_entropy", "background_peak",
    )
)


def _table_params(name: str) -> tuple[float, float]:
    """Deterministic per-column (mean, sd) for the IQM-style tables."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    mu = 1.0 + (int.from_bytes(digest[:4], "big") / 2**32) * 99.0
    sigma = 0.5 + 0.05 * mu
    return mu, sigma


@dataclass
class ShiftProfile:
    """Distribution shift applied to one feature group in the test corpus.

    offset_sd moves the grand mean (in units of each feature's noise sd),
    scale stretches values about the shifted mean, signal_retention
    multiplies the pass-fail mean gap, and noise_inflation multiplies the
    noise sd. Counts only honour offset and retention.
    """

    offset_sd: float = 0.0
    scale: float = 1.0
    signal_retention: float = 1.0
    noise_inflation: float = 1.0

    def to_dict(self) -> dict:
        return {
            "offset_sd": self.offset_sd,
            "scale": self.scale,
            "signal_retention": self.signal_retention,
            "noise_inflation": self.noise_inflation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ShiftProfile":
        return cls(**{k: float(v) for k, v in data.items()})


_IDENTITY_SHIFT = ShiftProfile()


@dataclass
class SynthConfig:
    n_scans: int
    pass_rate: float = 0.74
    effect_sizes: dict = field(default_factory=lambda: {
        GROUP_FLAGQC: 2.0, GROUP_MRIQC_FUNCTIONAL: 2.0, GROUP_MRIQC_STRUCTURAL: 2.0,
    })
    n_signal_features: dict = field(default_factory=lambda: {
        GROUP_FLAGQC: 8, GROUP_MRIQC_FUNCTIONAL: 6, GROUP_MRIQC_STRUCTURAL: 6,
    })
    missing_step_rate: float = 0.1
    shift: dict = field(default_factory=dict)  # group -> ShiftProfile (test corpus only)
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.n_scans < 0:
            raise ConfigError("n_scans must be non-negative")
        if not 0.0 < self.pass_rate < 1.0:
            raise ConfigError("pass_rate must lie strictly between 0 and 1")
        for group, d in self.effect_sizes.items():
            if d < 0:
                raise ConfigError(f"effect size for {group} must be >= 0")
        if not 0.0 <= self.missing_step_rate <= 1.0:
            raise ConfigError("missing_step_rate must lie in [0, 1]")
        return self


@dataclass
class CorpusPaths:
    root: Path
    logs_dir: Path
    labels_csv: Path
    truth_flagqc_csv: Path
    mriqc_functional_csv: Path
    mriqc_structural_csv: Path
    meta_json: Path


def _signal_plan(config: SynthConfig) -> dict:
    """Pick which features carry class signal, and in which direction."""
    plan: dict[str, dict[str, int]] = {}
    pools = {
        GROUP_FLAGQC: sorted(_FLAGQC_MODEL),
        GROUP_MRIQC_FUNCTIONAL: sorted(MRIQC_FUNCTIONAL_COLUMNS),
        GROUP_MRIQC_STRUCTURAL: sorted(MRIQC_STRUCTURAL_COLUMNS),
    }
    for group, pool in pools.items():
        k = min(int(config.n_signal_features.get(group, 0)), len(pool))
        rng = substream(config.seed, "signal", group)
        chosen = sorted(rng.choice(len(pool), size=k, replace=False).tolist())
        directions = rng.integers(0, 2, size=k) * 2 - 1
        plan[group] = {pool[i]: int(d) for i, d in zip(chosen, directions)}
    return plan


def _draw_gauss(rng, mu, sigma, gap, shift: ShiftProfile) -> float:
    center = mu + shift.offset_sd * sigma
    return center + shift.scale * (
        gap * shift.signal_retention + rng.normal(0.0, sigma * shift.noise_inflation)
    )


def _draw_count(rng, lam, gap_sd, shift: ShiftProfile) -> int:
    sd = math.sqrt(lam)
    lam_eff = lam + shift.offset_sd * sd + gap_sd * shift.signal_retention * sd
    return int(rng.poisson(max(lam_eff, 1.0)))


def _clock_text(second_of_day: int) -> str:
    s = second_of_day % 86400
    return f"{s // 3600:02d}:{(s % 3600) // 60:02d}:{s % 60:02d}"


def _printed(kind: str, value) -> str:
    if kind == "count":
        return str(int(value))
    if kind == "runtime":
        return format_number(float(value))
    return f"{value:.6g}"


def _scan_flagqc_values(rng, is_pass: bool, d: float, signal: dict, shift: ShiftProfile) -> dict:
    """Planted FLAG-QC values (pre-print) for one scan."""
    values = {}
    for name, (kind, mu, sigma) in _FLAGQC_MODEL.items():
        direction = signal.get(name, 0)
        if kind == "count":
            gap_sd = 0.0 if is_pass or not direction else direction * d
            values[name] = _draw_count(rng, mu, gap_sd, shift)
        else:
            gap = 0.0 if is_pass or not direction else direction * d * sigma
            raw = _draw_gauss(rng, mu, sigma, gap, shift)
            if kind == "runtime":
                values[name] = max(1, int(round(raw)))
            else:
                if name.endswith("fraction"):
                    raw = max(raw, 0.0)
                values[name] = raw
    return values


def _compose_log(rng, scan_id: str, values: dict, missing_steps: set) -> tuple[str, dict]:
    """Render the log text; returns (text, printed-truth values with Missing=None)."""
    truth: dict = {}
    lines = [f"== fMRI preprocessing run for {scan_id} ==", "## pipeline options loaded"]
    clock = int(rng.integers(0, 86400))

    def emit_value(name):
        kind = _FLAGQC_MODEL[name][0]
        text = _printed(kind, values[name])
        truth[name] = float(text)
        return text

    lines.append(_LINE_TEMPLATES["input_voxel_count"][1].format(v=emit_value("input_voxel_count")))
    step_content: dict[str, list[str]] = {s: [] for s in _STEPS}
    for name, (step, template) in _LINE_TEMPLATES.items():
        if step in ("header",) or name == "warp_rms_error":
            continue
        step_content[step].append(template.format(v=emit_value(name)))
    for axis, (lo_name, hi_name) in _BBOX_AXES.items():
        step_content["skullstrip"].append(
            f"++ brain extent {axis}: {emit_value(lo_name)} .. {emit_value(hi_name)}"
        )
    # rms error is logged per refinement pass; the rule takes the last one
    rms_final = _printed("gauss", values["warp_rms_error"])
    for fudge in (2.4, 1.3):
        step_content["warp"].append(f"++ warp: rms error = {float(rms_final) * fudge:.6g}")
    step_content["warp"].append(f"++ warp: rms error = {rms_final}")
    truth["warp_rms_error"] = float(rms_final)

    for step in _STEPS:
        runtime_name = f"runtime_{step}"
        if step in missing_steps:
            for name, (owner, _) in _LINE_TEMPLATES.items():
                if owner == step:
                    truth[name] = None
            if step == "skullstrip":
                for lo, hi in _BBOX_AXES.values():
                    truth[lo] = truth[hi] = None
            if step == "warp":
                truth["warp_rms_error"] = None
            truth[runtime_name] = None
            clock += int(rng.integers(1, 6))
            continue
        runtime = int(values[runtime_name])
        truth[runtime_name] = float(runtime)
        lines.append(f"[{_clock_text(clock)}] ==== begin {step} ====")
        lines.extend(step_content[step])
        if rng.random() < 0.3:
            lines.append(f"## note: {step} pass completed without retries")
        clock += runtime
        lines.append(f"[{_clock_text(clock)}] ==== end {step} ====")
        clock += int(rng.integers(1, 6))
    lines.append("== run complete ==")
    return "\n".join(lines) + "\n", truth


def _corpus_paths(root: Path) -> CorpusPaths:
    root = Path(root)
    return CorpusPaths(
        root=root,
        logs_dir=root / "logs",
        labels_csv=root / "labels.csv",
        truth_flagqc_csv=root / "truth_flagqc.csv",
        mriqc_functional_csv=root / "mriqc_functional.csv",
        mriqc_structural_csv=root / "mriqc_structural.csv",
        meta_json=root / "corpus.json",
    )


def _emit_corpus(config: SynthConfig, outdir, plan: dict, corpus_tag: str,
                 shift: dict) -> CorpusPaths:
    paths = _corpus_paths(Path(outdir))
    paths.logs_dir.mkdir(parents=True, exist_ok=True)
    rule_names = default_rules().names
    shift = {g: (p if isinstance(p, ShiftProfile) else ShiftProfile.from_dict(p))
             for g, p in (shift or {}).items()}

    label_rows = []
    truth_rows = []
    func_rows = []
    struct_rows = []
    d_of = {g: float(config.effect_sizes.get(g, 0.0)) for g in
            (GROUP_FLAGQC, GROUP_MRIQC_FUNCTIONAL, GROUP_MRIQC_STRUCTURAL)}
    for i in range(config.n_scans):
        scan_id = f"scan_{i:05d}"
        rng = substream(config.seed, corpus_tag, "scan", i)
        is_pass = bool(rng.random() < config.pass_rate)
        label_rows.append((scan_id, "pass" if is_pass else "fail"))

        flag_shift = shift.get(GROUP_FLAGQC, _IDENTITY_SHIFT)
        values = _scan_flagqc_values(rng, is_pass, d_of[GROUP_FLAGQC], plan[GROUP_FLAGQC], flag_shift)
        missing_steps: set = set()
        if not is_pass and config.missing_step_rate > 0 and rng.random() < config.missing_step_rate:
            missing_steps.add(_STEPS[int(rng.integers(0, len(_STEPS)))])
        text, truth = _compose_log(rng, scan_id, values, missing_steps)
        (paths.logs_dir / f"{scan_id}.log").write_text(text, encoding="utf-8", newline="\n")
        truth_rows.append([scan_id] + [format_number(truth[name]) if truth[name] is not None else ""
                                       for name in rule_names])

        for group, columns, rows in (
            (GROUP_MRIQC_FUNCTIONAL, MRIQC_FUNCTIONAL_COLUMNS, func_rows),
            (GROUP_MRIQC_STRUCTURAL, MRIQC_STRUCTURAL_COLUMNS, struct_rows),
        ):
            profile = shift.get(group, _IDENTITY_SHIFT)
            signal = plan[group]
            cells = [scan_id]
            for col in columns:
                mu, sigma = _table_params(col)
                direction = signal.get(col, 0)
                gap = 0.0 if is_pass or not direction else direction * d_of[group] * sigma
                cells.append(f"{_draw_gauss(rng, mu, sigma, gap, profile):.6g}")
            rows.append(cells)

    write_csv(paths.labels_csv, ["scan_id", "label"], label_rows)
    write_csv(paths.truth_flagqc_csv, ["scan_id"] + rule_names, truth_rows)
    write_csv(paths.mriqc_functional_csv, ["scan_id"] + list(MRIQC_FUNCTIONAL_COLUMNS), func_rows)
    write_csv(paths.mriqc_structural_csv, ["scan_id"] + list(MRIQC_STRUCTURAL_COLUMNS), struct_rows)
    write_json_atomic(paths.meta_json, {
        "corpus": corpus_tag,
        "n_scans": config.n_scans,
        "pass_rate": config.pass_rate,
        "seed": config.seed,
        "effect_sizes": d_of,
        "signal_plan": plan,
        "missing_step_rate": config.missing_step_rate,
        "shift": {g: p.to_dict() for g, p in shift.items()},
    })
    return paths


def generate(config: SynthConfig, outdir) -> CorpusPaths:
    """Write one corpus: log files, labels CSV, ground-truth and IQM tables."""
    config.validate()
    plan = _signal_plan(config)
    return _emit_corpus(config, outdir, plan, "train", shift={})


def generate_shifted_pair(config: SynthConfig, outdir) -> tuple[CorpusPaths, CorpusPaths]:
    """Write a (train, test) pair sharing signal structure.

    The test corpus applies config.shift per feature group; groups without a
    profile keep their class-conditional geometry, so a zero shift makes the
    two corpora exchangeable draws of the same distributions.
    """
    config.validate()
    outdir = Path(outdir)
    plan = _signal_plan(config)
    train = _emit_corpus(config, outdir / "train", plan, "train", shift={})
    test = _emit_corpus(config, outdir / "test", plan, "test", shift=config.shift)
    return train, test
