"""Flat key=value experiment configuration.

One text file drives the whole study: simulator knobs, training
hyperparameters and benchmark sizes.  '#' starts a comment, unknown keys are
rejected, and every value is validated up front so a bad config fails before
any work starts.  All keys are optional; the defaults reproduce the packaged
benchmark.
"""

import hashlib
import json

from .simulator import DIGITS, SimulatorConfig
from .trainer import TrainConfig

__all__ = ["ExperimentConfig", "load_experiment_config", "CONFIG_DEFAULTS"]


def _int_list(text):
    return tuple(int(tok) for tok in str(text).split(",") if tok.strip())


# key -> (coercion, default)
CONFIG_DEFAULTS = {
    "sim.prob_0": (float, 0.25),
    "sim.prob_3": (float, 0.7),
    "sim.prob_6": (float, 0.6),
    "sim.prob_8": (float, 0.5),
    "sim.prob_9": (float, 0.6),
    "sim.noise_sigma": (float, 0.15),
    "sim.glyph_value": (float, 0.85),
    "sim.min_length": (int, 10),
    "sim.max_length": (int, 100),
    "sim.mean_length": (int, 20),
    "train.hidden": (int, 64),
    "train.encoder_hidden": (int, 128),
    "train.features": (int, 64),
    "train.lr": (float, 1e-3),
    "train.optimizer": (str, "adam"),
    "train.beta1": (float, 0.9),
    "train.beta2": (float, 0.999),
    "train.eps": (float, 1e-8),
    "train.epochs": (int, 30),
    "train.batch_size": (int, 4),
    "train.delta_max": (float, 10.0),
    # The packaged benchmark supervises sequence models at every step: with
    # final-step-only supervision the dense encoder memorizes the ~2000
    # supervised images outright (training loss ~0) before any temporal
    # structure is learned, and held-out scores degrade for every model.
    # Per-step supervision makes memorization infeasible (~40k supervised
    # images) and trains the same final-step prediction task.  Final-step
    # mode stays the API default (TrainConfig) and is available for ablation.
    "train.supervision": (str, "all"),
    "train.threshold": (float, 0.5),
    "compare.n_train": (int, 2000),
    "compare.n_test": (int, 500),
    "compare.seeds": (_int_list, (1, 2, 3)),
}


class ExperimentConfig:
    """Resolved configuration: defaults overlaid with file values."""

    def __init__(self, values=None):
        resolved = {key: default for key, (_, default) in CONFIG_DEFAULTS.items()}
        for key, raw in (values or {}).items():
            if key not in CONFIG_DEFAULTS:
                raise ValueError(f"unknown config key {key!r}")
            coerce, _ = CONFIG_DEFAULTS[key]
            try:
                resolved[key] = coerce(raw)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
        self.values = resolved
        # Build the typed configs eagerly so validation happens up front.
        self.simulator_config()
        self.train_config("tlstmv1")

    def __getitem__(self, key):
        return self.values[key]

    def simulator_config(self):
        return SimulatorConfig(
            appear_probs={d: self.values[f"sim.prob_{d}"] for d in DIGITS},
            noise_sigma=self.values["sim.noise_sigma"],
            glyph_value=self.values["sim.glyph_value"],
            min_length=self.values["sim.min_length"],
            max_length=self.values["sim.max_length"],
            mean_length=self.values["sim.mean_length"],
        )

    def train_config(self, model):
        return TrainConfig(
            model=model,
            hidden=self.values["train.hidden"],
            encoder_hidden=self.values["train.encoder_hidden"],
            features=self.values["train.features"],
            lr=self.values["train.lr"],
            optimizer=self.values["train.optimizer"],
            beta1=self.values["train.beta1"],
            beta2=self.values["train.beta2"],
            eps=self.values["train.eps"],
            epochs=self.values["train.epochs"],
            batch_size=self.values["train.batch_size"],
            delta_max=self.values["train.delta_max"],
            supervision=self.values["train.supervision"],
            threshold=self.values["train.threshold"],
        )

    def as_dict(self):
        out = {}
        for key, value in self.values.items():
            out[key] = list(value) if isinstance(value, tuple) else value
        return out

    def config_hash(self):
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("ascii")).hexdigest()[:16]


def load_experiment_config(path=None):
    """Parse a key=value config file (or defaults when path is None)."""
    if path is None:
        return ExperimentConfig()
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise OSError(f"failed reading config from {path}: {exc}") from exc
    for line_no, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {line.strip()!r}")
        key, _, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if key in values:
            raise ValueError(f"{path}:{line_no}: duplicate key {key!r}")
        values[key] = raw
    return ExperimentConfig(values)
