"""Flat key=value experiment configs.

Format: one ``section.key = value`` per line, ``#`` starts a comment, blank
lines ignored.  Parsing is strict: unknown keys, keys that are invalid for
the selected task/model/map/plan, missing required keys, duplicate keys, and
type errors are all rejected, each error naming the key (and line) involved.
Every error found is reported, not just the first.

Value mini-grammars:

* ``map.eps``      -- comma-separated nonnegative reals: ``0, 0.1, 0.5, 2``
* ``run.seeds``    -- ints, comma-separated or an inclusive range ``0..9``
* ``run.plans``    -- comma-separated plan specs: ``greedy(b=1)``,
                      ``lazy(K=10, b=1)``, ``exact``
* ``run.schedule`` -- ``constant(0.01)`` or ``inv_sqrt_t(1.0)``; the latter
                      resolves to scale/sqrt(T) for greedy/exact plans and
                      scale/(K*sqrt(T)) for lazy plans
* ``data.labels``  -- raw-to-encoded label pairs: ``0:0, 1:1`` or ``-1:-1, 1:1``
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

from .. import optim
from ..datasets import fmt_float


class ConfigError(ValueError):
    """All problems found in a config, one message per line."""

    def __init__(self, problems: list[str], source: str = "<config>"):
        self.problems = list(problems)
        super().__init__(
            f"{source}: {len(problems)} config error(s):\n  - "
            + "\n  - ".join(problems)
        )


@dataclass(frozen=True)
class PlanSpec:
    """A deployment plan as written in the config."""

    kind: str            # "greedy" | "lazy" | "exact"
    b: int = 1
    K: int | None = None

    def slug(self) -> str:
        if self.kind == "lazy":
            return f"lazy-K{self.K}-b{self.b}"
        if self.kind == "greedy":
            return f"greedy-b{self.b}"
        return "exact"

    def label(self) -> str:
        if self.kind == "lazy":
            return f"lazy(K={self.K}, b={self.b})"
        if self.kind == "greedy":
            return f"greedy(b={self.b})"
        return "exact"

    def to_plan(self) -> optim.DeploymentPlan:
        if self.kind == "lazy":
            return optim.Lazy(K=self.K, b=self.b)
        return optim.Greedy(b=self.b)


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str            # "constant" | "inv_sqrt_t"
    value: float = 1.0

    def resolve(self, plan: PlanSpec) -> optim.StepSchedule:
        if self.kind == "constant":
            return optim.Constant(self.value)
        if plan.kind == "lazy":
            return optim.LazyInvSqrtT(self.value)
        return optim.InvSqrtT(self.value)

    def label(self) -> str:
        return f"{self.kind}({fmt_float(self.value)})"


@dataclass
class SyntheticData:
    m: int
    d: int
    m_test: int = 200
    flip_frac: float = 0.1
    seed: int = 0


@dataclass
class CsvData:
    path: str
    feature_count: int
    label_column: int
    label_map: dict
    header: bool = False
    train_frac: float = 0.8
    split_seed: int = 0
    normalize: bool = False


@dataclass
class ModelSpec:
    kind: str            # "linear_sigmoid" | "mlp"
    c: float = 0.1
    beta: float = 1e-3
    h1: int = 10
    h2: int = 50
    bias_init: float = 0.0


@dataclass
class CheckSpec:
    instances: int = 100
    pairs: int = 10
    steps: int = 20
    trials: int = 2000
    seed: int = 0


@dataclass
class ExperimentConfig:
    task: str            # "synthetic" | "csv"
    data: SyntheticData | CsvData
    model: ModelSpec
    map_kind: str        # "location" | "best_response"
    eps_list: tuple
    plans: tuple
    schedule: ScheduleSpec
    T: int
    eval_every: int = 100
    seeds: tuple = (0,)
    out_dir: str = "out"
    check: CheckSpec = field(default_factory=CheckSpec)

    def grid(self):
        """All (plan, eps, seed) combinations, in config order."""
        return [
            (plan, eps, seed)
            for plan in self.plans
            for eps in self.eps_list
            for seed in self.seeds
        ]

    def canonical(self) -> str:
        """Effective config as sorted key=value lines (defaults filled)."""
        lines = [f"task = {self.task}"]
        if isinstance(self.data, SyntheticData):
            d = self.data
            lines += [
                f"data.m = {d.m}",
                f"data.d = {d.d}",
                f"data.m_test = {d.m_test}",
                f"data.flip_frac = {fmt_float(d.flip_frac)}",
                f"data.seed = {d.seed}",
            ]
        else:
            d = self.data
            labels = ",".join(f"{k}:{v}" for k, v in sorted(d.label_map.items()))
            lines += [
                f"data.path = {d.path}",
                f"data.feature_count = {d.feature_count}",
                f"data.label_column = {d.label_column}",
                f"data.labels = {labels}",
                f"data.header = {str(d.header).lower()}",
                f"data.train_frac = {fmt_float(d.train_frac)}",
                f"data.split_seed = {d.split_seed}",
                f"data.normalize = {str(d.normalize).lower()}",
            ]
        m = self.model
        lines.append(f"model.kind = {m.kind}")
        lines.append(f"model.beta = {fmt_float(m.beta)}")
        if m.kind == "linear_sigmoid":
            lines.append(f"model.c = {fmt_float(m.c)}")
        else:
            lines += [
                f"model.h1 = {m.h1}",
                f"model.h2 = {m.h2}",
                f"model.bias_init = {fmt_float(m.bias_init)}",
            ]
        lines.append(f"map.kind = {self.map_kind}")
        lines.append("map.eps = " + ",".join(fmt_float(e) for e in self.eps_list))
        lines.append("run.plans = " + ",".join(p.label() for p in self.plans))
        lines.append(f"run.schedule = {self.schedule.label()}")
        lines.append(f"run.T = {self.T}")
        lines.append(f"run.eval_every = {self.eval_every}")
        lines.append("run.seeds = " + ",".join(str(s) for s in self.seeds))
        lines.append(
            f"check.instances = {self.check.instances}",
        )
        lines.append(f"check.pairs = {self.check.pairs}")
        lines.append(f"check.steps = {self.check.steps}")
        lines.append(f"check.trials = {self.check.trials}")
        lines.append(f"check.seed = {self.check.seed}")
        return "\n".join(sorted(lines)) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


class _Reader:
    """Tracks which keys were consumed and collects typed-value errors."""

    def __init__(self, pairs: dict, problems: list[str]):
        self.pairs = pairs          # key -> (raw value, line number)
        self.problems = problems
        self.consumed: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.pairs

    def raw(self, key: str, default=None, required: bool = False):
        if key in self.pairs:
            self.consumed.add(key)
            return self.pairs[key][0]
        if required:
            self.problems.append(f"missing required key '{key}'")
        return default

    def _typed(self, key, conv, typename, default, required):
        raw = self.raw(key, None, required)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            detail = str(exc) or f"expected {typename}"
            self.problems.append(f"key '{key}': {detail} (got {raw!r})")
            return default

    def take_int(self, key, default=None, required=False):
        return self._typed(key, _to_int, "an integer", default, required)

    def take_float(self, key, default=None, required=False):
        return self._typed(key, _to_float, "a number", default, required)

    def take_bool(self, key, default=None, required=False):
        return self._typed(key, _to_bool, "true/false", default, required)

    def take_choice(self, key, choices, default=None, required=False):
        def conv(raw):
            if raw not in choices:
                raise ValueError(f"expected one of {sorted(choices)}")
            return raw

        return self._typed(key, conv, "choice", default, required)

    def reject_leftovers(self, context: dict[str, str]):
        """Everything not consumed is unknown or invalid-in-context."""
        for key in self.pairs:
            if key in self.consumed:
                continue
            line = self.pairs[key][1]
            reason = context.get(key, "unknown key")
            self.problems.append(f"line {line}: key '{key}': {reason}")


def _to_int(raw: str) -> int:
    # Accept scientific-notation integers like 1e5 since horizons are
    # conventionally written that way.
    try:
        return int(raw)
    except ValueError:
        f = float(raw)
        if f != int(f):
            raise ValueError("expected an integer") from None
        return int(f)


def _to_float(raw: str) -> float:
    return float(raw)


def _to_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError("expected true or false")


def _split_top(s: str) -> list[str]:
    """Split on commas that are not inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    return [p for p in parts if p]


_PLAN_RE = re.compile(r"^([a-z_]+)\s*(?:\((.*)\))?$")


def _parse_plan(text: str) -> PlanSpec:
    mt = _PLAN_RE.match(text.strip())
    if not mt:
        raise ValueError(f"malformed plan {text!r}")
    kind, argstr = mt.group(1), mt.group(2)
    args = {}
    if argstr and argstr.strip():
        for part in argstr.split(","):
            if "=" not in part:
                raise ValueError(f"plan {text!r}: malformed argument {part.strip()!r}")
            k, v = (s.strip() for s in part.split("=", 1))
            if k in args:
                raise ValueError(f"plan {text!r}: duplicate key '{k}'")
            args[k] = v
    if kind == "greedy":
        allowed = {"b"}
    elif kind == "lazy":
        allowed = {"K", "b"}
    elif kind == "exact":
        allowed = set()
    else:
        raise ValueError(f"unknown plan kind {kind!r}")
    for k in args:
        if k not in allowed:
            raise ValueError(f"plan {text!r}: key '{k}' is not valid for a {kind} plan")
    b = _to_int(args["b"]) if "b" in args else 1
    if b < 1:
        raise ValueError(f"plan {text!r}: b must be >= 1")
    if kind == "lazy":
        if "K" not in args:
            raise ValueError(f"plan {text!r}: lazy plans require K")
        K = _to_int(args["K"])
        if K < 1:
            raise ValueError(f"plan {text!r}: K must be >= 1")
        return PlanSpec("lazy", b=b, K=K)
    return PlanSpec(kind, b=b)


def _parse_plans(raw: str) -> tuple:
    items = _split_top(raw)
    if not items:
        raise ValueError("expected at least one plan")
    return tuple(_parse_plan(p) for p in items)


def _parse_schedule(raw: str) -> ScheduleSpec:
    mt = _PLAN_RE.match(raw.strip())
    if not mt:
        raise ValueError(f"malformed schedule {raw!r}")
    kind, argstr = mt.group(1), mt.group(2)
    if kind not in ("constant", "inv_sqrt_t"):
        raise ValueError(f"unknown schedule kind {kind!r}")
    if argstr is None or not argstr.strip():
        if kind == "constant":
            raise ValueError("constant schedule requires a step size")
        return ScheduleSpec(kind, 1.0)
    value = _to_float(argstr.strip())
    if value <= 0:
        raise ValueError("schedule value must be positive")
    return ScheduleSpec(kind, value)


def _parse_eps_list(raw: str) -> tuple:
    vals = tuple(_to_float(p) for p in _split_top(raw))
    if not vals:
        raise ValueError("expected at least one value")
    if any(v < 0 for v in vals):
        raise ValueError("eps values must be nonnegative")
    return vals


_RANGE_RE = re.compile(r"^(-?\d+)\s*\.\.\s*(-?\d+)$")


def _parse_seed_list(raw: str) -> tuple:
    raw = raw.strip()
    mt = _RANGE_RE.match(raw)
    if mt:
        lo, hi = int(mt.group(1)), int(mt.group(2))
        if hi < lo:
            raise ValueError(f"empty seed range {raw!r}")
        return tuple(range(lo, hi + 1))
    vals = tuple(_to_int(p) for p in _split_top(raw))
    if not vals:
        raise ValueError("expected at least one seed")
    if len(set(vals)) != len(vals):
        raise ValueError("duplicate seeds")
    return vals


def _parse_label_map(raw: str) -> dict:
    out = {}
    for part in _split_top(raw):
        if ":" not in part:
            raise ValueError(f"malformed label pair {part!r} (want raw:encoded)")
        k, v = (s.strip() for s in part.split(":", 1))
        if k in out:
            raise ValueError(f"duplicate raw label {k!r}")
        out[k] = _to_int(v)
    if not out:
        raise ValueError("expected at least one label pair")
    return out


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    problems: list[str] = []
    pairs: dict[str, tuple[str, int]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(f"line {line_no}: expected 'key = value', got {line.strip()!r}")
            continue
        key, value = (s.strip() for s in stripped.split("=", 1))
        if not key:
            problems.append(f"line {line_no}: empty key")
            continue
        if key in pairs:
            problems.append(f"line {line_no}: duplicate key '{key}'")
            continue
        pairs[key] = (value, line_no)

    r = _Reader(pairs, problems)

    task = r.take_choice("task", {"synthetic", "csv"}, required=True)
    model_kind = r.take_choice(
        "model.kind", {"linear_sigmoid", "mlp"}, required=True
    )
    map_kind = r.take_choice(
        "map.kind", {"location", "best_response"}, required=True
    )
    if problems:
        # The remaining keys cannot be validated without knowing the branch.
        raise ConfigError(problems, source)

    context: dict[str, str] = {}

    if task == "synthetic":
        data = SyntheticData(
            m=r.take_int("data.m", required=True),
            d=r.take_int("data.d", required=True),
            m_test=r.take_int("data.m_test", 200),
            flip_frac=r.take_float("data.flip_frac", 0.1),
            seed=r.take_int("data.seed", 0),
        )
        for key in (
            "data.path", "data.feature_count", "data.label_column",
            "data.labels", "data.header", "data.train_frac",
            "data.split_seed", "data.normalize",
        ):
            context[key] = "only valid when task = csv"
        if data.m is not None and data.m < 1:
            problems.append("key 'data.m': must be >= 1")
        if data.d is not None and data.d < 1:
            problems.append("key 'data.d': must be >= 1")
        if data.flip_frac is not None and not 0 <= data.flip_frac < 1:
            problems.append("key 'data.flip_frac': must lie in [0, 1)")
    else:
        feature_count = r.take_int("data.feature_count", required=True)
        label_map = {"0": 0, "1": 1}
        if r.has("data.labels"):
            label_map = r._typed("data.labels", _parse_label_map, "label map", label_map, False)
        data = CsvData(
            path=r.raw("data.path", required=True),
            feature_count=feature_count,
            label_column=r.take_int(
                "data.label_column",
                feature_count if feature_count is not None else 0,
            ),
            label_map=label_map,
            header=r.take_bool("data.header", False),
            train_frac=r.take_float("data.train_frac", 0.8),
            split_seed=r.take_int("data.split_seed", 0),
            normalize=r.take_bool("data.normalize", False),
        )
        for key in ("data.m", "data.d", "data.m_test", "data.flip_frac", "data.seed"):
            context[key] = "only valid when task = synthetic"
        if data.train_frac is not None and not 0 < data.train_frac < 1:
            problems.append("key 'data.train_frac': must lie in (0, 1)")

    model = ModelSpec(kind=model_kind, beta=r.take_float("model.beta", 1e-3))
    if model_kind == "linear_sigmoid":
        model.c = r.take_float("model.c", 0.1)
        for key in ("model.h1", "model.h2", "model.bias_init"):
            context[key] = "only valid when model.kind = mlp"
        if model.c is not None and model.c <= 0:
            problems.append("key 'model.c': must be positive")
    else:
        model.h1 = r.take_int("model.h1", 10)
        model.h2 = r.take_int("model.h2", 50)
        model.bias_init = r.take_float("model.bias_init", 0.0)
        context["model.c"] = "only valid when model.kind = linear_sigmoid"
    if model.beta is not None and model.beta < 0:
        problems.append("key 'model.beta': must be nonnegative")

    if map_kind == "best_response" and model_kind != "mlp":
        problems.append(
            "key 'map.kind': best_response requires model.kind = mlp "
            "(the shift needs the model's input gradient)"
        )

    eps_list = r._typed("map.eps", _parse_eps_list, "eps list", None, True) or ()
    plans = r._typed("run.plans", _parse_plans, "plan list", None, True) or ()
    schedule = r._typed(
        "run.schedule", _parse_schedule, "schedule", ScheduleSpec("inv_sqrt_t", 1.0), False
    )
    T = r.take_int("run.T", required=True)
    if T is not None and T < 1:
        problems.append("key 'run.T': must be >= 1")
    eval_every = r.take_int("run.eval_every", 100)
    if eval_every is not None and eval_every < 1:
        problems.append("key 'run.eval_every': must be >= 1")
    seeds = r._typed("run.seeds", _parse_seed_list, "seed list", (0,), False)
    out_dir = r.raw("out.dir", "out")

    check = CheckSpec(
        instances=r.take_int("check.instances", 100),
        pairs=r.take_int("check.pairs", 10),
        steps=r.take_int("check.steps", 20),
        trials=r.take_int("check.trials", 2000),
        seed=r.take_int("check.seed", 0),
    )

    r.reject_leftovers(context)
    if problems:
        raise ConfigError(problems, source)

    return ExperimentConfig(
        task=task,
        data=data,
        model=model,
        map_kind=map_kind,
        eps_list=eps_list,
        plans=plans,
        schedule=schedule,
        T=T,
        eval_every=eval_every,
        seeds=seeds,
        out_dir=out_dir,
        check=check,
    )


def parse_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))
