import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

from cmctorus.exceptions import ConfigError, DomainError
from cmctorus.matching import MatchOptions
from cmctorus.profile import WeightedNormSpec
from cmctorus.reduction import FixedPointOptions, PrescribedCurvature

MESH_FORMATS = ("obj", "ply")


@dataclass(frozen=True)
class RunConfig:
    """
    Every setting of a run, with its default.

    Exactly one of a (fixed neck size) and auto_match (solve for a_n) is set;
    at most one of n (closed torus) and eps (open bend) is set.
    """
    A: float = -1.0
    gamma: float = 1.0
    beta: Optional[float] = None
    n: Optional[int] = None
    eps: Optional[float] = None
    a: Optional[float] = None
    auto_match: bool = False
    n_t: int = 512
    n_theta: int = 32
    tol_fp: float = 1e-10
    tol_match: float = 1e-8
    max_iter: int = 200
    anderson_depth: int = 0
    mu: float = 1.5
    delta: float = 1.0
    r0: float = 0.3
    output_dir: str = "."
    mesh_format: str = "obj"
    seed: int = 0

    def validate(self):
        if not (0.0 < self.gamma < 2.0):
            raise ConfigError(f"gamma={self.gamma} outside (0, 2)")
        if self.n_theta < 16 or self.n_theta & (self.n_theta - 1):
            raise ConfigError(f"n_theta={self.n_theta} must be a power of two, at least 16")
        if self.n_t < 64 or self.n_t % 2:
            raise ConfigError(f"n_t={self.n_t} must be even and at least 64")
        if (self.a is None) == (not self.auto_match):
            raise ConfigError("Set exactly one of 'a' and 'auto_match'")
        if self.a is not None and not (0.0 < self.a <= 0.5):
            raise ConfigError(f"a={self.a} outside (0, 1/2]")
        if self.n is not None and self.eps is not None:
            raise ConfigError("Set at most one of 'n' and 'eps'")
        if self.n is not None and self.n < 4:
            raise ConfigError(f"n={self.n} must be at least 4")
        if self.eps is not None and self.eps < 0:
            raise ConfigError(f"eps={self.eps} must be non-negative")
        if self.auto_match and self.n is None:
            raise ConfigError("auto_match needs the number of periods 'n'")
        if not (0 <= self.anderson_depth <= 3):
            raise ConfigError(f"anderson_depth={self.anderson_depth} outside 0..3")
        if self.r0 <= 0:
            raise ConfigError(f"r0={self.r0} must be positive")
        if self.mesh_format not in MESH_FORMATS:
            raise ConfigError(f"mesh_format '{self.mesh_format}' not in {MESH_FORMATS}")
        try:
            WeightedNormSpec(self.mu, self.delta)
            self.curvature()
        except DomainError as e:
            raise ConfigError(str(e))
        return self

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as file:
                data = json.load(file)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read configuration {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"Configuration {path} is not a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides):
        """Copy with every override that is not None applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self):
        return asdict(self)

    def curvature(self):
        return PrescribedCurvature(A=self.A, gamma=self.gamma, beta=self.beta)

    def norm_spec(self):
        return WeightedNormSpec(self.mu, self.delta)

    def fixed_point_options(self, callback=None):
        return FixedPointOptions(tol=self.tol_fp, max_iter=self.max_iter, anderson_depth=self.anderson_depth,
                                 norm=self.norm_spec(), callback=callback)

    def match_options(self, callback=None):
        return MatchOptions(n_t=self.n_t, n_theta=self.n_theta, tol_match=self.tol_match,
                            fixed_point=self.fixed_point_options(callback))
