"""Event-driven synthetic digit-sequence generator.

A sequence is a chain of 32x32 grey images.  Each image shows a set of digits
from {0, 3, 6, 8, 9} on a noisy grey background; the set evolves according to
a transition table conditioned on the integer time lapse delta between
consecutive images.  Some digits persist for long stretches, some are rare,
some churn quickly, which is what makes the time lapse informative.

Transition rules are written per single current digit (or "null" for the
empty state).  When several digits coexist, the allowed next digits are the
union of each present digit's row.  Cell values are compact delta-set strings:
"7:10" is the inclusive range [7, 10], "1:3,5:9" a union of ranges, "-" empty.
"""

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .glyphs import GLYPHS
from .rng import substream, uniform_int

__all__ = [
    "DIGITS",
    "NULL",
    "IMAGE_SIZE",
    "BACKGROUND",
    "DELTA_MIN",
    "DELTA_MAX",
    "SimulatorConfig",
    "TransitionTable",
    "Step",
    "SequenceSample",
    "allowed_digits",
    "step_state",
    "render_image",
    "state_to_labels",
    "generate_sequence",
    "generate_dataset",
    "load_dataset",
]

DIGITS = (0, 3, 6, 8, 9)  # label-vector order everywhere in the package
NULL = "null"  # marker for the empty digit state

IMAGE_SIZE = 32
BACKGROUND = 0.5
GLYPH_SIZE = 8

DELTA_MIN = 1
DELTA_MAX = 10

DATASET_SCHEMA = 1

# Rows are current single-digit states (plus the empty "null" state), columns
# the candidate next digits; each cell lists the deltas that open that path.
_DEFAULT_RULES = {
    0: {0: "7:10", 6: "5", 8: "3,7", 3: "1,2,7", 9: "-", NULL: "1:6"},
    6: {0: "1,2", 6: "1:3,5:9", 8: "3,6", 3: "5", 9: "-", NULL: "4,10"},
    8: {0: "1", 6: "1,2,10", 8: "2:7", 3: "3,5", 9: "-", NULL: "8:10"},
    3: {0: "-", 6: "1:5", 8: "6:10", 3: "1,2,6:8", 9: "-", NULL: "1:10"},
    9: {0: "-", 6: "1:3", 8: "5:7", 3: "-", 9: "1:9", NULL: "10"},
    NULL: {0: "3,4", 6: "5", 8: "10", 3: "-", 9: "6,7", NULL: "1:3,8,9"},
}


def parse_delta_set(text):
    """Parse a delta-set cell like "1:3,5:9" into a frozenset of ints."""
    text = text.strip()
    if text == "-" or not text:
        return frozenset()
    values = set()
    for token in text.split(","):
        token = token.strip()
        if ":" in token:
            lo_s, hi_s = token.split(":")
            lo, hi = int(lo_s), int(hi_s)
        else:
            lo = hi = int(token)
        if not (DELTA_MIN <= lo <= hi <= DELTA_MAX):
            raise ValueError(f"delta range {token!r} outside [{DELTA_MIN}, {DELTA_MAX}]")
        values.update(range(lo, hi + 1))
    return frozenset(values)


@dataclass(frozen=True)
class TransitionTable:
    """Delta-conditioned digit transition rules.

    ``rules[row][col]`` is the frozenset of deltas under which digit ``col``
    (or the null marker) may appear at the next step when ``row`` describes
    the current state.
    """

    rules: dict

    @classmethod
    def from_spec(cls, spec):
        rows = set(spec)
        expected = set(DIGITS) | {NULL}
        if rows != expected:
            raise ValueError(f"transition table rows {rows} != {expected}")
        rules = {}
        for row, cells in spec.items():
            if set(cells) != expected:
                raise ValueError(f"row {row!r} columns {set(cells)} != {expected}")
            rules[row] = {col: parse_delta_set(text) for col, text in cells.items()}
        return cls(rules)

    @classmethod
    def default(cls):
        return cls.from_spec(_DEFAULT_RULES)

    def as_dict(self):
        """JSON-friendly dump (string keys, sorted delta lists) for inspection."""
        return {
            str(row): {str(col): sorted(deltas) for col, deltas in cells.items()}
            for row, cells in self.rules.items()
        }


def allowed_digits(table, state, delta):
    """Digits (and possibly the null marker) permitted at the next step.

    An empty ``state`` reads the null row; otherwise the result is the union
    of every present digit's row.  The null marker is included iff at least
    one consulted row permits it at this delta.
    """
    if not DELTA_MIN <= delta <= DELTA_MAX:
        raise ValueError(f"delta {delta} out of range [{DELTA_MIN}, {DELTA_MAX}]")
    rows = [NULL] if not state else sorted(state)
    allowed = set()
    for row in rows:
        for col, deltas in table.rules[row].items():
            if delta in deltas:
                allowed.add(col)
    return allowed


def step_state(table, state, delta, rng, probs):
    """Sample the next digit state.

    Each allowed digit is included independently with its configured
    probability (digits visited in ascending order so the draw sequence is
    reproducible).  If nothing was sampled and the null marker is not
    allowed, the highest-probability allowed digit is forced, ties broken
    toward the lowest digit value.
    """
    allowed = allowed_digits(table, state, delta)
    candidates = sorted(d for d in allowed if d != NULL)
    nxt = {d for d in candidates if rng.random() < probs[d]}
    if nxt or NULL in allowed or not candidates:
        return frozenset(nxt)
    forced = max(candidates, key=lambda d: (probs[d], -d))
    return frozenset({forced})


def state_to_labels(state):
    """Binary label vector over DIGITS for a digit state."""
    return np.array([1.0 if d in state else 0.0 for d in DIGITS])


def render_image(digits, rng, noise_sigma=0.15, glyph_value=0.85):
    """Render a digit state onto a noisy grey 32x32 canvas.

    Each digit's 8x8 glyph is stamped at a uniformly random position (fully
    inside the frame) with a uniformly random rotation from {0, 90, 180, 270}
    degrees; overlapping stamps are permitted.  Gaussian pixel noise of the
    given sigma is then added and the image clamped to [0, 1].  Draw order:
    per digit ascending (row, col, rotation), then one noise field (skipped
    when sigma is zero).
    """
    canvas = np.full((IMAGE_SIZE, IMAGE_SIZE), BACKGROUND)
    span = IMAGE_SIZE - GLYPH_SIZE
    for digit in sorted(digits):
        row = uniform_int(rng, 0, span)
        col = uniform_int(rng, 0, span)
        turns = uniform_int(rng, 0, 3)
        stamp = np.rot90(GLYPHS[digit], k=turns)
        patch = canvas[row : row + GLYPH_SIZE, col : col + GLYPH_SIZE]
        patch[stamp > 0] = glyph_value
    if noise_sigma > 0:
        canvas += rng.normal(0.0, noise_sigma, canvas.shape)
        np.clip(canvas, 0.0, 1.0, out=canvas)
    return canvas


@dataclass(frozen=True)
class SimulatorConfig:
    """Knobs of the generator; defaults reproduce the benchmark setting."""

    appear_probs: dict = field(
        default_factory=lambda: {0: 0.25, 3: 0.7, 6: 0.6, 8: 0.5, 9: 0.6}
    )
    noise_sigma: float = 0.15
    glyph_value: float = 0.85
    min_length: int = 10
    max_length: int = 100
    mean_length: int = 20

    def __post_init__(self):
        if set(self.appear_probs) != set(DIGITS):
            raise ValueError(f"appear_probs must cover digits {DIGITS}")
        for d, p in self.appear_probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"appear probability for {d} must be in [0,1], got {p}")
        if not 1 <= self.min_length <= self.mean_length <= self.max_length:
            raise ValueError(
                f"need min <= mean <= max length, got "
                f"{self.min_length}/{self.mean_length}/{self.max_length}"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def as_dict(self):
        return {
            "appear_probs": {str(d): self.appear_probs[d] for d in DIGITS},
            "noise_sigma": self.noise_sigma,
            "glyph_value": self.glyph_value,
            "min_length": self.min_length,
            "max_length": self.max_length,
            "mean_length": self.mean_length,
        }


@dataclass
class Step:
    """One observation: time lapse since the previous one, labels, pixels."""

    delta: int
    labels: np.ndarray
    image: np.ndarray | None = None
    features: np.ndarray | None = None


@dataclass
class SequenceSample:
    sequence_id: str
    steps: list

    @property
    def length(self):
        return len(self.steps)


def _draw_length(rng, config):
    # Min-shifted geometric with the configured mean, redrawing past the max.
    p = 1.0 / (config.mean_length - config.min_length + 1)
    while True:
        length = config.min_length + int(rng.geometric(p)) - 1
        if length <= config.max_length:
            return length


def generate_sequence(table, rng, config, sequence_id=""):
    """Generate one sequence: empty initial state, then delta-driven steps.

    The first recorded step is the digit-free initial state with delta 0;
    every later step draws delta uniformly on [1, 10] and advances the state
    through the transition table.
    """
    length = _draw_length(rng, config)
    state = frozenset()
    steps = [
        Step(
            delta=0,
            labels=state_to_labels(state),
            image=render_image(state, rng, config.noise_sigma, config.glyph_value),
        )
    ]
    for _ in range(length - 1):
        delta = uniform_int(rng, DELTA_MIN, DELTA_MAX)
        state = step_state(table, state, delta, rng, config.appear_probs)
        steps.append(
            Step(
                delta=delta,
                labels=state_to_labels(state),
                image=render_image(state, rng, config.noise_sigma, config.glyph_value),
            )
        )
    return SequenceSample(sequence_id=sequence_id, steps=steps)


def _pack_pixels(image):
    # Row-major (C order) uint8 bytes, top-left origin, one byte per pixel.
    quantized = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    return base64.b64encode(quantized.tobytes(order="C")).decode("ascii")


def _unpack_pixels(text):
    # Kept as uint8 to hold large datasets in memory; consumers divide by 255.
    raw = np.frombuffer(base64.b64decode(text), dtype=np.uint8)
    if raw.size != IMAGE_SIZE * IMAGE_SIZE:
        raise ValueError(f"packed image has {raw.size} bytes, expected {IMAGE_SIZE**2}")
    return raw.reshape(IMAGE_SIZE, IMAGE_SIZE)


def _sample_record(sample, store_features):
    steps = []
    for step in sample.steps:
        rec = {
            "delta": int(step.delta),
            "labels": [int(v) for v in step.labels],
        }
        if store_features:
            rec["features"] = [float(v) for v in step.features]
        else:
            rec["pixels"] = _pack_pixels(step.image)
        steps.append(rec)
    return {"schema": DATASET_SCHEMA, "id": sample.sequence_id, "steps": steps}


def generate_dataset(config, seed, n_sequences, path, split="train", encoder=None):
    """Write ``n_sequences`` samples as JSON lines, one sequence per line.

    Each sequence gets its own rng substream keyed by (seed, "simulate",
    split, index), so output is bit-reproducible and independent of
    generation order.  With ``encoder`` set (a callable mapping an image to a
    feature vector), per-step features are stored instead of pixels.
    """
    if n_sequences < 1:
        raise ValueError(f"n_sequences must be >= 1, got {n_sequences}")
    table = TransitionTable.default()
    try:
        with open(path, "w", encoding="ascii") as fh:
            for i in range(n_sequences):
                rng = substream(seed, "simulate", split, i)
                sample = generate_sequence(table, rng, config, sequence_id=f"{split}-{i}")
                if encoder is not None:
                    for step in sample.steps:
                        step.features = encoder(step.image)
                line = json.dumps(
                    _sample_record(sample, store_features=encoder is not None),
                    sort_keys=True,
                    separators=(",", ":"),
                )
                fh.write(line + "\n")
    except OSError as exc:
        raise OSError(f"failed writing dataset to {path}: {exc}") from exc
    return path


def load_dataset(path):
    """Read a JSONL dataset back into SequenceSample objects.

    Loaded images are the quantized uint8 grids exactly as stored in the
    file; they dequantize to value/255.  The encoder accepts either form.
    """
    samples = []
    try:
        with open(path, "r", encoding="ascii") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("schema") != DATASET_SCHEMA:
                    raise ValueError(
                        f"{path}:{line_no}: unsupported dataset schema {rec.get('schema')!r}"
                    )
                steps = []
                for s in rec["steps"]:
                    steps.append(
                        Step(
                            delta=int(s["delta"]),
                            labels=np.array([float(v) for v in s["labels"]]),
                            image=_unpack_pixels(s["pixels"]) if "pixels" in s else None,
                            features=(
                                np.array([float(v) for v in s["features"]])
                                if "features" in s
                                else None
                            ),
                        )
                    )
                samples.append(SequenceSample(sequence_id=rec["id"], steps=steps))
    except OSError as exc:
        raise OSError(f"failed reading dataset from {path}: {exc}") from exc
    return samples
