"""Run configuration: a JSON document with ``world``, ``engine`` and ``output_dir``.

Cluster count and size bound come either from ``engine.n`` (target
neighbourhood size; ``K = ceil(N / n)``, ``gamma = gamma_frac * n``) or from
an explicit ``engine.K`` (then ``n = N / K``).
"""
import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .engine import EngineConfig
from .errors import InvalidConfig
from .simulator import WorldConfig

REQUIRED_WORLD = ("N", "M", "C", "d")
REQUIRED_ENGINE = ("epochs",)


class ConfigError(InvalidConfig):
    pass


@dataclass
class EngineSettings:
    epochs: int
    n: Optional[float] = None
    K: Optional[int] = None
    gamma_frac: float = 0.9
    lambda_dual: float = 20.0
    alpha: float = 0.8
    tau: float = 0.95
    T: float = 0.1
    target_temp_mult: float = 5.0
    H: int = 1
    warmup_epochs: int = 20
    da_momentum: float = 0.99
    B: int = 64
    mu: int = 7
    seed: int = 0


@dataclass
class RunConfig:
    world: WorldConfig
    engine: EngineSettings
    output_dir: str = "out"

    @property
    def K(self):
        if self.engine.K is not None:
            return int(self.engine.K)
        return math.ceil(self.world.N / self.engine.n)

    @property
    def n(self):
        if self.engine.K is not None:
            return self.world.N / self.engine.K
        return self.engine.n

    @property
    def gamma(self):
        return self.engine.gamma_frac * self.n

    def engine_config(self):
        e = self.engine
        return EngineConfig(
            N=self.world.N, C=self.world.C, d=self.world.d, K=self.K, gamma=self.gamma,
            lambda_dual=e.lambda_dual, alpha=e.alpha, tau=e.tau, T=e.T,
            target_temp_mult=e.target_temp_mult, H=e.H, warmup_epochs=e.warmup_epochs,
            da_momentum=e.da_momentum, seed=e.seed)

    def derived(self):
        return {"K": self.K, "n": self.n, "gamma": self.gamma}

    def to_dict(self):
        d = {"world": asdict(self.world), "engine": asdict(self.engine),
             "output_dir": self.output_dir}
        d["engine"] = {k: v for k, v in d["engine"].items() if v is not None}
        return d

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(data, {"world", "engine", "output_dir"}, "")
        world = _section(data, "world", REQUIRED_WORLD, WorldConfig)
        engine = _section(data, "engine", REQUIRED_ENGINE, EngineSettings)
        cfg = cls(WorldConfig(**world), EngineSettings(**engine),
                  data.get("output_dir", "out"))
        try:
            return cfg.validate()
        except TypeError as exc:
            raise ConfigError("ill-typed field: %s" % exc) from exc

    def validate(self):
        e = self.engine
        if (e.n is None) == (e.K is None):
            raise ConfigError("engine: give exactly one of 'n' or 'K'")
        if e.n is not None and e.n <= 0:
            raise ConfigError("engine.n must be > 0")
        if self.K < 2:
            raise ConfigError("engine: derived K=%d, need K >= 2" % self.K)
        if e.epochs < 1 or e.B < 1 or e.mu < 1 or e.H < 1:
            raise ConfigError("engine: epochs, B, mu and H must be >= 1")
        if not 0 <= e.alpha <= 1:
            raise ConfigError("engine.alpha must lie in [0, 1]")
        if not 0 < e.tau < 1:
            raise ConfigError("engine.tau must lie in (0, 1)")
        if e.T <= 0 or e.target_temp_mult <= 0 or e.lambda_dual <= 0:
            raise ConfigError("engine: T, target_temp_mult, lambda_dual must be > 0")
        if not 0 < e.da_momentum < 1:
            raise ConfigError("engine.da_momentum must lie in (0, 1)")
        try:
            self.world.validate()
        except InvalidConfig as exc:
            raise ConfigError("world: %s" % exc) from exc
        return self

    def replace(self, param, value):
        """Copy with one sweepable parameter changed."""
        new = copy.deepcopy(self)
        if param == "d":
            new.world.d = int(value)
        elif param == "n":
            new.engine.n, new.engine.K = value, None
        elif param == "H":
            new.engine.H = int(value)
        else:
            setattr(new.engine, param, value)
        return new.validate()


def _reject_unknown(data, allowed, where):
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ConfigError("unknown field%s %s" % (" in " + where if where else "",
                                                 ", ".join(repr(x) for x in extra)))


def _section(data, name, required, klass):
    sec = data.get(name)
    if not isinstance(sec, dict):
        raise ConfigError("missing required field '%s'" % name)
    _reject_unknown(sec, {f.name for f in fields(klass)}, name)
    for key in required:
        if key not in sec:
            raise ConfigError("missing required field '%s.%s'" % (name, key))
    return dict(sec)


def load(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config %s is not valid JSON: %s" % (path, exc)) from exc
    return RunConfig.from_dict(data)
