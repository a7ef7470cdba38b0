"""Run-wide numerical parameters and the reproducibility config record."""

from dataclasses import dataclass, field, asdict

#: Default precision order for truncated Laurent/power series.  The
#: verification suite needs order >= 8; 16 gives headroom cheaply.
DEFAULT_ORDER = 16


@dataclass(frozen=True)
class Numerics:
    """Geometric tolerances, all in chart units unless noted.

    The defaults are robust on every shipped scene; `scaled` produces a
    variant with the integrator tolerances multiplied by `tolerance_scale`
    (used for the tolerance-halving invariance checks).
    """

    trap_radius: float = 1e-2        # rho: critical-point capture balls
    seed_offset: float = 1e-3        # eps: separatrix seed distance from a saddle
    rk_tol: float = 1e-9             # local error target per unit arclength
    max_step: float = 0.05
    min_step: float = 1e-12
    max_arc_length: float = 1e3
    grid_n: int = 48                 # validation grid per chart axis
    level_resolution: int = 256      # samples per level-curve component
    zero_tol: float = 1e-7           # |v(p)| at declared critical points
    merge_radius: float = 1e-4       # critical points may not be closer
    graze_tol: float = 1e-6          # transverse-crossing degeneracy guard
    fixed_point_tol: float = 1e-3    # |Phi'-1| below this is degenerate

    def scaled(self, tolerance_scale):
        d = asdict(self)
        d["rk_tol"] = self.rk_tol * tolerance_scale
        d["max_step"] = self.max_step * min(1.0, tolerance_scale ** 0.25)
        return Numerics(**d)


@dataclass
class RunConfig:
    """Everything needed to reproduce a run; serialized into every report."""

    scene: str = ""
    params: dict = field(default_factory=dict)
    order: int = DEFAULT_ORDER
    level: float | None = None
    delta: float = 1e-3
    trials: int = 20
    seed: int = 0
    tolerance_scale: float = 1.0
    out_dir: str | None = None

    def as_dict(self):
        return {
            "scene": self.scene,
            "params": dict(sorted(self.params.items())),
            "order": self.order,
            "level": self.level,
            "delta": self.delta,
            "trials": self.trials,
            "seed": self.seed,
            "tolerance_scale": self.tolerance_scale,
        }

    def numerics(self):
        return Numerics().scaled(self.tolerance_scale)
