"""File formats: run configs, domain CSVs, checkpoints, reports, manifests.

Everything is text (CSV / JSON) with floats written at 17 significant digits,
so every file round-trips losslessly and identical runs produce identical
bytes. Unknown config keys are rejected by name rather than ignored — a silent
typo in a config would otherwise invalidate a reproduction.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .autoencoder import PdaeModel, TrainConfig
from .genmodel import Domain
from .harness.experiments import ExperimentConfig
from .numeric.mlp import MlpParams


class ConfigError(ValueError):
    """Invalid run configuration or file schema (exit code 1 at the CLI)."""


class VerificationFailure(RuntimeError):
    """A requested verification did not pass (exit code 2 at the CLI)."""


# --------------------------------------------------------------------------
# floats and CSV


def format_float(x) -> str:
    """17 significant digits: float(format_float(x)) == x for finite doubles."""
    return "%.17g" % float(x)


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def read_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV (missing header)") from None
        return header, [row for row in reader]


# --------------------------------------------------------------------------
# run configuration

_TRAIN_KEYS = {
    "lambda_rec": float,
    "lambda_prior": float,
    "lambda_sparsity": float,
    "lr_encoder": float,
    "lr_decoder": float,
    "lr_shift": float,
    "batch_size": int,
    "epochs": int,
}

_TOP_KEYS = {
    "latent_dim": int,
    "n_elementary": int,
    "base_std": float,
    "noise_dims": int,
    "obs_noise_std": float,
    "n_per_domain": int,
    "hidden": "int_list",
    "beta": float,
    "model_noise_dim": "int_or_null",
    "model_noise_std": float,
    "weights_mode": str,
    "seeds": "int_list",
    "suite_seed": int,
    "eval_points": int,
    "shift_matrix": "float_matrix",
    "train_labels": "float_matrix",
    "noise_levels": "float_list",
    "train": dict,
}


def _check_value(key, value, kind):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r} must be a string, got {value!r}")
        return value
    if kind == "int_or_null":
        if value is None:
            return None
        return _check_value(key, value, int)
    if kind in ("int_list", "float_list"):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"config key {key!r} must be a nonempty list")
        item = int if kind == "int_list" else float
        return [_check_value(f"{key}[{i}]", v, item) for i, v in enumerate(value)]
    if kind == "float_matrix":
        if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
            raise ConfigError(f"config key {key!r} must be a list of lists")
        return [
            [_check_value(f"{key}[{i}][{j}]", v, float) for j, v in enumerate(row)]
            for i, row in enumerate(value)
        ]
    if kind is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"config key {key!r} must be an object")
        return value
    raise AssertionError(f"unhandled schema kind {kind!r}")


def validate_config(raw: dict) -> dict:
    """Type-check a raw config document; unknown keys are errors by name."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object of settings")
    out = {}
    for key, value in raw.items():
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _check_value(key, value, _TOP_KEYS[key])
    for key, value in out.get("train", {}).items():
        if key not in _TRAIN_KEYS:
            raise ConfigError(f"unknown config key 'train.{key}'")
        out["train"][key] = _check_value(f"train.{key}", value, _TRAIN_KEYS[key])
    return out


def load_config(path) -> dict:
    path = Path(path)
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return validate_config(raw)


def config_digest(raw: dict) -> str:
    """Stable hash of the (validated) config document."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def build_experiment(raw: dict, scale: str = "desk", seed: int | None = None) -> ExperimentConfig:
    """Turn a validated config document into an ExperimentConfig.

    ``scale`` picks the defaults the document overrides; ``seed`` (when given)
    pins a single-seed run, as the pipeline commands do.
    """
    raw = dict(raw)
    train_over = raw.pop("train", {})
    raw.pop("noise_levels", None)  # consumed by the sweep command, not the config
    if scale not in ("desk", "paper"):
        raise ConfigError(f"scale must be 'desk' or 'paper', got {scale!r}")
    base = ExperimentConfig.desk() if scale == "desk" else ExperimentConfig.paper()
    train_cfg = base.train
    if train_over:
        merged = {k: getattr(train_cfg, k) for k in _TRAIN_KEYS}
        merged.update(train_over)
        try:
            train_cfg = TrainConfig(**merged)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    kwargs = {f: getattr(base, f) for f in (
        "latent_dim", "n_elementary", "shift_matrix", "train_labels", "base_std",
        "noise_dims", "obs_noise_std", "n_per_domain", "hidden", "beta",
        "model_noise_dim", "model_noise_std", "weights_mode", "seeds",
        "suite_seed", "eval_points",
    )}
    for key, value in raw.items():
        if key in ("hidden", "seeds", "train_labels"):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value) if key == "train_labels" else tuple(value)
        kwargs[key] = value
    kwargs["train"] = train_cfg
    if seed is not None:
        kwargs["seeds"] = (int(seed),)
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def sweep_levels(raw: dict) -> tuple:
    from .harness.experiments import SWEEP_NOISE_LEVELS

    levels = raw.get("noise_levels")
    return SWEEP_NOISE_LEVELS if levels is None else tuple(float(v) for v in levels)


# --------------------------------------------------------------------------
# domains on disk


def domain_name(index: int) -> str:
    return f"domain_{index:02d}"


def save_domains(out_dir, domains) -> list:
    """One CSV per domain (x columns, then z columns when latents are kept)
    plus labels.json mapping domain name to its label vector."""
    out_dir = Path(out_dir)
    written = []
    labels = {}
    for i, d in enumerate(domains):
        name = domain_name(i)
        header = [f"x{j + 1}" for j in range(d.points.shape[1])]
        block = d.points
        if d.latents is not None:
            header += [f"z{j + 1}" for j in range(d.latents.shape[1])]
            block = np.concatenate([d.points, d.latents], axis=1)
        write_csv(out_dir / f"{name}.csv", header, block)
        labels[name] = [float(v) for v in d.label]
        written.append(f"{name}.csv")
    with open(out_dir / "labels.json", "w") as f:
        json.dump(labels, f, indent=2, sort_keys=True)
        f.write("\n")
    written.append("labels.json")
    return written


def load_domains(data_dir) -> list:
    data_dir = Path(data_dir)
    labels_path = data_dir / "labels.json"
    if not labels_path.exists():
        raise FileNotFoundError(f"missing {labels_path}")
    with open(labels_path) as f:
        try:
            labels = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{labels_path}: not valid JSON ({e})") from None
    domains = []
    for name in sorted(labels):
        header, rows = read_csv(data_dir / f"{name}.csv")
        x_cols = [i for i, h in enumerate(header) if h.startswith("x")]
        z_cols = [i for i, h in enumerate(header) if h.startswith("z")]
        if not x_cols or x_cols != list(range(len(x_cols))):
            raise ConfigError(f"{name}.csv: expected leading x1..xD columns, got {header}")
        data = np.array([[float(v) for v in row] for row in rows])
        if data.ndim != 2 or data.shape[1] != len(header):
            raise ConfigError(f"{name}.csv: ragged or empty rows")
        # ascontiguousarray: column selection yields an F-ordered array, whose
        # strided reductions sum in a different order than the C-ordered arrays
        # the generator produces; loaded data must reproduce in-memory runs bit
        # for bit.
        points = np.ascontiguousarray(data[:, x_cols])
        latents = np.ascontiguousarray(data[:, z_cols]) if z_cols else None
        domains.append(Domain(label=np.asarray(labels[name], dtype=float), points=points, latents=latents))
    return domains


# --------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def _mlp_doc(params: MlpParams) -> dict:
    return {
        "hidden_activation": params.hidden_activation,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def _mlp_from_doc(doc: dict, where: str) -> MlpParams:
    for key in ("weights", "biases", "hidden_activation"):
        if key not in doc:
            raise ConfigError(f"checkpoint {where} is missing {key!r}")
    return MlpParams(
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        hidden_activation=doc["hidden_activation"],
    )


def save_checkpoint(path, model: PdaeModel, history: dict | None = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "dims": {
            "x_dim": model.x_dim,
            "latent_dim": model.latent_dim,
            "n_elementary": model.n_elementary,
            "noise_dim": model.noise_dim,
        },
        "noise_std": model.noise_std,
        "beta": model.beta,
        "encoder": _mlp_doc(model.encoder),
        "decoder": _mlp_doc(model.decoder),
        "shift_matrix": model.shift_matrix.tolist(),
        "history": history if history is not None else {},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def load_checkpoint(path):
    """Returns (model, history). Schema problems name the offending field."""
    path = Path(path)
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported format_version {version!r}")
    for key in ("dims", "encoder", "decoder", "shift_matrix", "noise_std", "beta"):
        if key not in doc:
            raise ConfigError(f"{path}: checkpoint missing key {key!r}")
    dims = doc["dims"]
    for key in ("x_dim", "latent_dim", "n_elementary", "noise_dim"):
        if key not in dims:
            raise ConfigError(f"{path}: checkpoint dims missing {key!r}")
    try:
        model = PdaeModel(
            encoder=_mlp_from_doc(doc["encoder"], "encoder"),
            decoder=_mlp_from_doc(doc["decoder"], "decoder"),
            shift_matrix=np.asarray(doc["shift_matrix"], dtype=float),
            noise_dim=int(dims["noise_dim"]),
            noise_std=float(doc["noise_std"]),
            beta=float(doc["beta"]),
        )
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None
    if model.x_dim != dims["x_dim"] or model.latent_dim != dims["latent_dim"] or model.n_elementary != dims["n_elementary"]:
        raise ConfigError(f"{path}: dims block disagrees with layer shapes")
    return model, doc.get("history", {})


# --------------------------------------------------------------------------
# evaluation reports

ROW_HEADER = (
    "method",
    "case_id",
    "kind",
    "arity",
    "seed",
    "energy_distance",
    "mmd_squared",
    "mean_diff",
)

AGGREGATE_HEADER = (
    "method",
    "kind",
    "n_seeds",
    "energy_distance_mean",
    "energy_distance_std",
    "mmd_squared_mean",
    "mmd_squared_std",
    "mean_diff_mean",
    "mean_diff_std",
)


def eval_row_cells(row) -> list:
    return [getattr(row, field) for field in ROW_HEADER]


def aggregate_row_cells(row) -> list:
    return [getattr(row, field) for field in AGGREGATE_HEADER]


def write_report(out_dir, report, prefix: str = "report") -> list:
    """rows CSV + aggregate CSV; returns the written file names."""
    out_dir = Path(out_dir)
    rows_name = f"{prefix}_rows.csv"
    agg_name = f"{prefix}_aggregate.csv"
    write_csv(out_dir / rows_name, ROW_HEADER, (eval_row_cells(r) for r in report.rows))
    write_csv(out_dir / agg_name, AGGREGATE_HEADER, (aggregate_row_cells(a) for a in report.aggregate()))
    return [rows_name, agg_name]


class RowWriter:
    """Streams EvalRows to a CSV, flushing per row so partial results survive
    a failure later in the run."""

    def __init__(self, path):
        self._file = open(path, "w", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(ROW_HEADER)
        self._file.flush()

    def __call__(self, row) -> None:
        self._writer.writerow([_cell(v) for v in eval_row_cells(row)])
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


# --------------------------------------------------------------------------
# manifests


def write_manifest(out_dir, command: str, digest: str, seed, outputs) -> str:
    doc = {
        "command": command,
        "config_hash": digest,
        "seed": seed,
        "tool_version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": sorted(outputs),
    }
    with open(Path(out_dir) / "manifest.json", "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    return "manifest.json"
