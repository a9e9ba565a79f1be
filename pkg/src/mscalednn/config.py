"""Experiment configuration files.

Files are INI style (``configparser``).  Sections and keys::

    [experiment]  name, task (fit|pde), loss (mse|ritz|lse), epochs, seed,
                  out, threads, chunk_size, eval_every, record_wall_ms
    [network]     widths, activation, scales, init
    [optimizer]   lr0, lr_decay, decay_kind, beta1, beta2, adam_eps
    [data]        fit:  target, embedding, d, d_in, train_size, test_size,
                        batch_size, domain
                  pde:  d, n, n_tilde, beta
    [eval]        mse_mode (fixed|step), eval_size

``widths`` is dash separated and may use ``d`` for the input dimension
(``d-200-200-1``).  ``scales`` is an integer part count ``A``, ``spread:A``
(the first-layer neurons spread evenly over the factors ``1..A``, used
when ``A`` exceeds the width), ``const:c`` (every neuron scaled by ``c``),
or an explicit comma separated list.  ``domain`` is ``lo, hi`` and
accepts ``pi`` multiples such as ``-pi/2``.

Sections named ``[variant.<label>]`` hold ``section.key = value``
overrides; each variant is one run.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .activations import ActivationKind
from .errors import ConfigError
from .network import build_scale_vector
from .optimizer import DECAY_KINDS
from .problems import DEFAULT_DOMAINS, EMBEDDINGS, TARGET_KINDS, FitTarget


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    task: str
    loss: str
    epochs: int
    seed: int
    widths: tuple[int, ...]
    activation: str = "srelu"
    scales: object = 1
    init: str = "D1"
    lr0: float = 1e-4
    lr_decay: float = 0.0
    decay_kind: str = "inverse_time"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    target: str | None = None
    embedding: str = "none"
    d: int | None = None
    d_in: int = 3
    train_size: int = 0
    test_size: int = 0
    batch_size: int = 0
    domain: tuple[float, float] | None = None
    n: int = 1000
    n_tilde: int = 100
    beta: float = 1000.0
    mse_mode: str = "fixed"
    eval_size: int = 0
    out: str | None = None
    threads: int = 1
    chunk_size: int = 2048
    eval_every: int = 1
    record_wall_ms: bool = False
    label: str = ""
    variants: tuple = ()

    def fit_target(self) -> FitTarget:
        return FitTarget(self.target, self.embedding, self.d, self.d_in)

    @property
    def input_dim(self) -> int:
        if self.task == "pde":
            return self.d
        return self.fit_target().input_dim

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Replace fields here and in every variant (used for CLI flags)."""
        variants = tuple((label, {**raw, **kw}) for label, raw in self.variants)
        return dataclasses.replace(self, variants=variants, **kw)

    def expand(self) -> list["ExperimentConfig"]:
        """One fully validated config per variant (or just this one)."""
        if not self.variants:
            return [dataclasses.replace(self, label=self.label or self.name)]
        return [_build(raw, label=label) for label, raw in self.variants]

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple) and f.name != "variants":
                v = list(v)
            out[f.name] = v
        out["variants"] = [label for label, _ in self.variants]
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


_PI_RE = re.compile(r"^\s*([+-]?\s*[0-9.eE+-]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$")


def parse_number(text: str) -> float:
    """Float, optionally a multiple of ``pi``: ``1.5``, ``pi``, ``-pi/2``, ``2*pi``."""
    s = text.strip().lower()
    m = _PI_RE.match(s)
    if m:
        coef = m.group(1).replace(" ", "")
        c = -1.0 if coef == "-" else 1.0 if coef in ("", "+") else float(coef)
        div = float(m.group(2)) if m.group(2) else 1.0
        return c * math.pi / div
    return float(s)


def _int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _widths(text: str) -> tuple:
    parts = [p.strip() for p in re.split(r"[-,\s]+", text.strip()) if p.strip()]
    return tuple(p if p == "d" else _int(p) for p in parts)


def _scales(text: str):
    t = text.strip().lower()
    if t.startswith("spread:"):
        return ("spread", _int(t.split(":", 1)[1]))
    if t.startswith("const:"):
        return ("const", parse_number(t.split(":", 1)[1]))
    if "," in t:
        return tuple(parse_number(p) for p in t.split(","))
    return _int(t)


def _domain(text: str) -> tuple[float, float]:
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != 2:
        raise ValueError("domain must be 'lo, hi'")
    return parse_number(parts[0]), parse_number(parts[1])


def _batch(text: str):
    return "full" if text.strip().lower() == "full" else _int(text)


def _str(text: str) -> str:
    return text.strip()


def _lower(text: str) -> str:
    return text.strip().lower()


# (section, key) -> (field, parser)
SCHEMA = {
    ("experiment", "name"): ("name", _str),
    ("experiment", "task"): ("task", _lower),
    ("experiment", "loss"): ("loss", _lower),
    ("experiment", "epochs"): ("epochs", _int),
    ("experiment", "seed"): ("seed", _int),
    ("experiment", "out"): ("out", _str),
    ("experiment", "threads"): ("threads", _int),
    ("experiment", "chunk_size"): ("chunk_size", _int),
    ("experiment", "eval_every"): ("eval_every", _int),
    ("experiment", "record_wall_ms"): ("record_wall_ms", _bool),
    ("network", "widths"): ("widths", _widths),
    ("network", "activation"): ("activation", _lower),
    ("network", "scales"): ("scales", _scales),
    ("network", "init"): ("init", lambda s: s.strip().upper()),
    ("optimizer", "lr0"): ("lr0", parse_number),
    ("optimizer", "lr_decay"): ("lr_decay", parse_number),
    ("optimizer", "decay_kind"): ("decay_kind", _lower),
    ("optimizer", "beta1"): ("beta1", parse_number),
    ("optimizer", "beta2"): ("beta2", parse_number),
    ("optimizer", "adam_eps"): ("adam_eps", parse_number),
    ("data", "target"): ("target", _lower),
    ("data", "embedding"): ("embedding", _lower),
    ("data", "d"): ("d", _int),
    ("data", "d_in"): ("d_in", _int),
    ("data", "train_size"): ("train_size", _int),
    ("data", "test_size"): ("test_size", _int),
    ("data", "batch_size"): ("batch_size", _batch),
    ("data", "domain"): ("domain", _domain),
    ("data", "n"): ("n", _int),
    ("data", "n_tilde"): ("n_tilde", _int),
    ("data", "beta"): ("beta", parse_number),
    ("eval", "mse_mode"): ("mse_mode", _lower),
    ("eval", "eval_size"): ("eval_size", _int),
}

REQUIRED = ("task", "loss", "epochs", "seed", "widths")


def _parse_item(section: str, key: str, value: str):
    entry = SCHEMA.get((section, key))
    if entry is None:
        raise ConfigError(f"unknown key '{section}.{key}'")
    field, parser = entry
    try:
        return field, parser(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid value for '{section}.{key}': {value!r} ({exc})") from None


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    fields: dict = {}
    variants = []
    for section in parser.sections():
        if section.startswith("variant."):
            label = section.split(".", 1)[1].strip()
            if not label:
                raise ConfigError("variant sections need a label: [variant.<label>]")
            raw = {}
            for dotted, value in parser.items(section):
                if "." not in dotted:
                    raise ConfigError(f"variant key '{dotted}' must be written as section.key")
                sec, key = dotted.split(".", 1)
                f, v = _parse_item(sec.strip(), key.strip(), value)
                raw[f] = v
            variants.append((label, raw))
            continue
        if section not in {s for s, _ in SCHEMA}:
            raise ConfigError(f"unknown section [{section}]")
        for key, value in parser.items(section):
            f, v = _parse_item(section, key, value)
            fields[f] = v

    for key in REQUIRED:
        if key not in fields:
            where = next(f"{s}.{k}" for (s, k), (f, _) in SCHEMA.items() if f == key)
            raise ConfigError(f"missing required key '{where}'")
    fields.setdefault("name", Path(source).stem)
    # variants keep raw (unresolved) fields so that e.g. "d-200-1" follows data.d
    merged = tuple((label, {**fields, **raw}) for label, raw in variants)
    cfg = _build(fields, variants=merged)
    cfg.expand()  # validate every variant before anything runs
    return cfg


def _build(fields: dict, label: str = "", variants: tuple = ()) -> ExperimentConfig:
    fields = dict(fields)
    task = fields.get("task")
    if task not in ("fit", "pde"):
        raise ConfigError(f"experiment.task must be fit or pde, got {task!r}")
    loss = fields.get("loss")
    if loss not in ("mse", "ritz", "lse"):
        raise ConfigError(f"experiment.loss must be mse, ritz or lse, got {loss!r}")
    if task == "fit" and loss != "mse":
        raise ConfigError(f"loss {loss!r} is incompatible with task 'fit' (use mse)")
    if task == "pde" and loss == "mse":
        raise ConfigError("loss 'mse' is incompatible with task 'pde' (use ritz or lse)")

    if fields.get("epochs", 0) < 0:
        raise ConfigError("experiment.epochs must be >= 0")
    if fields.get("seed", 0) < 0:
        raise ConfigError("experiment.seed must be >= 0")
    for key in ("threads", "chunk_size", "eval_every"):
        if key in fields and fields[key] < 1:
            raise ConfigError(f"experiment.{key} must be >= 1")

    try:
        fields["activation"] = ActivationKind.parse(fields.get("activation", "srelu")).value
    except ValueError as exc:
        raise ConfigError(f"network.activation: {exc}") from None
    if fields.get("init", "D1") not in ("D1", "D2"):
        raise ConfigError(f"network.init must be D1 or D2, got {fields.get('init')!r}")
    if fields.get("decay_kind", "inverse_time") not in DECAY_KINDS:
        raise ConfigError(f"optimizer.decay_kind must be one of {', '.join(DECAY_KINDS)}")
    if not fields.get("lr0", 1e-4) > 0:
        raise ConfigError("optimizer.lr0 must be positive")
    if not fields.get("lr_decay", 0.0) >= 0:
        raise ConfigError("optimizer.lr_decay must be non-negative")

    if task == "fit":
        target = fields.get("target")
        if target not in TARGET_KINDS:
            raise ConfigError(f"data.target must be one of {', '.join(TARGET_KINDS)}, got {target!r}")
        if fields.get("embedding", "none") not in EMBEDDINGS:
            raise ConfigError(f"data.embedding must be one of {', '.join(EMBEDDINGS)}")
        try:
            ft = FitTarget(target, fields.get("embedding", "none"), fields.get("d"), fields.get("d_in", 3))
        except ConfigError as exc:
            raise ConfigError(f"data: {exc}") from None
        fields["d"] = ft.d
        d = ft.input_dim
        if fields.get("train_size", 0) < 1:
            raise ConfigError("data.train_size must be >= 1")
        if fields.get("test_size", 0) < 0:
            raise ConfigError("data.test_size must be >= 0")
        bs = fields.get("batch_size", "full")
        if bs == "full" or bs == 0:
            bs = fields["train_size"]
        if not 1 <= bs <= fields["train_size"]:
            raise ConfigError(f"data.batch_size {bs} must be in 1..train_size ({fields['train_size']})")
        fields["batch_size"] = bs
        if fields.get("domain") is None:
            fields["domain"] = DEFAULT_DOMAINS[target]
        lo, hi = fields["domain"]
        if not lo < hi:
            raise ConfigError("data.domain must satisfy lo < hi")
    else:
        d = fields.get("d")
        if d is None or d < 1:
            raise ConfigError("data.d must be >= 1 for pde tasks")
        if fields.get("n", 1000) < 1 or fields.get("n_tilde", 100) < 1:
            raise ConfigError("data.n and data.n_tilde must be >= 1")
        if fields.get("beta", 1000.0) < 0:
            raise ConfigError("data.beta must be non-negative")
        if fields.get("mse_mode", "fixed") not in ("fixed", "step"):
            raise ConfigError("eval.mse_mode must be fixed or step")
        if fields.get("eval_size", 0) < 0:
            raise ConfigError("eval.eval_size must be >= 0")
        if not fields.get("eval_size"):
            fields["eval_size"] = 10 * fields.get("n", 1000)

    widths = tuple(d if w == "d" else w for w in fields["widths"])
    if len(widths) < 2 or any(not isinstance(w, int) or w < 1 for w in widths):
        raise ConfigError(f"network.widths must be positive integers, got {fields['widths']}")
    if widths[0] != d:
        raise ConfigError(f"network.widths starts with {widths[0]} but the input dimension is {d}")
    if widths[-1] != 1:
        raise ConfigError("network.widths must end with 1 (scalar output)")
    fields["widths"] = widths
    try:
        resolve_scales(fields.get("scales", 1), widths[1])
    except ConfigError as exc:
        raise ConfigError(f"network.scales: {exc}") from None

    allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
    fields = {k: v for k, v in fields.items() if k in allowed}
    return ExperimentConfig(**fields, label=label, variants=variants)


def resolve_scales(scales, n1: int):
    """Config scale entry -> argument for :func:`build_scale_vector`."""
    if isinstance(scales, tuple) and len(scales) == 2 and scales[0] == "spread":
        parts = scales[1]
        if parts < 1:
            raise ConfigError("spread part count must be >= 1")
        # neuron j (0-based) gets factor floor(j * A / n1) + 1
        return (np.arange(n1) * parts // n1 + 1).astype(np.float64)
    if isinstance(scales, tuple) and len(scales) == 2 and scales[0] == "const":
        return np.full(n1, float(scales[1]))
    if isinstance(scales, tuple):
        k = np.asarray(scales, dtype=np.float64)
        build_scale_vector(n1, k)
        return k
    build_scale_vector(n1, scales)
    return scales


def bundled_configs() -> list[str]:
    root = resources.files("mscalednn") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config(path) -> ExperimentConfig:
    """Load and validate a config file.

    ``path`` may also name a bundled config (``fig3`` or ``fig3.cfg``).
    """
    p = Path(path)
    if p.is_file():
        return parse_config_text(p.read_text(encoding="utf-8"), source=str(p))
    name = p.name if p.name.endswith(".cfg") else p.name + ".cfg"
    bundled = resources.files("mscalednn") / "configs" / name
    if p.parent == Path(".") and bundled.is_file():
        return parse_config_text(bundled.read_text(encoding="utf-8"), source=name)
    raise ConfigError(f"config file not found: {path}")
