"""The two case-study models and their reference formulas."""

from .errors import ModelError
from .model import ContinuousVariable, DiscreteVariable, HybridModel, Jump, Reaction, ReactionNetwork, Species

# F[0,T1] G[0,T2] (X >= kt): settle above kt within T1 and stay there for T2
SCHLOGL_FORMULA = "F[0,T1] G[0,T2] (X >= kt)"
SCHLOGL_FORMULA_PARAMS = {"T1": 10.0, "T2": 15.0, "kt": 300.0}

# low values of X1 alternate with high values, with a period in [T1, T2]
REPRESSILATOR_FORMULA = (
    "G[0,T]( ((X1 < klow) -> F[T1,T2](X1 > khigh))"
    " & ((X1 > khigh) -> F[T1,T2](X1 < klow))"
    " & F[0,T2](X1 > khigh) )"
)
REPRESSILATOR_FORMULA_PARAMS = {"klow": 20.0, "khigh": 60.0, "T1": 100.0, "T2": 4000.0, "T": 7000.0}

SCHLOGL_DEFAULTS = {
    "k1": 3e-7,
    "k2": 1e-4,
    "k3": 1e-3,
    "k4": 3.5,
    "X0": 247,
    "A0": 100000,
    "B0": 200000,
}


def builtin_schlogl(overrides=None, **kwargs):
    """Bistable Schlögl network with A and B held constant.

    ``c3`` is the effective production rate of ``B -> X``; unless given
    explicitly it equals ``k3 * B0`` (200 with the defaults).
    """
    overrides = dict(overrides or {}, **kwargs)
    unknown = set(overrides) - set(SCHLOGL_DEFAULTS) - {"c3"}
    if unknown:
        raise ModelError(f"unknown Schlögl parameters {sorted(unknown)}")
    p = dict(SCHLOGL_DEFAULTS, **overrides)
    c3 = overrides.get("c3", p["k3"] * p["B0"])
    species = [
        Species("X", int(p["X0"])),
        Species("A", int(p["A0"]), constant=True),
        Species("B", int(p["B0"]), constant=True),
    ]
    reactions = [
        Reaction("r1", {"A": 1, "X": 2}, {"X": 3}, "mass_action", "k1"),
        Reaction("r2", {"X": 3}, {"A": 1, "X": 2}, "mass_action", "k2"),
        Reaction("r3", {"B": 1}, {"X": 1}, "expr", "c3"),
        Reaction("r4", {"X": 1}, {"B": 1}, "mass_action", "k4"),
    ]
    params = {"k1": p["k1"], "k2": p["k2"], "k4": p["k4"], "c3": c3}
    return ReactionNetwork(species, reactions, params)


REPRESSILATOR_DEFAULTS = {"kp": 1.0, "kd": 0.01, "kb": 0.1, "ku": 0.001, "X1_0": 0.0, "X2_0": 0.0, "X3_0": 0.0}

# gene i is repressed by protein REPRESSOR[i]: TetR -| lambda-cI -| LacI -| TetR
# with X1 = TetR, X2 = lambda-cI, X3 = LacI
REPRESSOR = {1: 3, 2: 1, 3: 2}


def builtin_repressilator(overrides=None, **kwargs):
    """Hybrid repressilator: three continuous proteins, three boolean promoters.

    Protein i is produced at ``kp`` while its promoter ``g{i}`` is free and
    degrades at ``kd``.  The repressor binds a free promoter with hazard
    ``kb * X_repressor`` and leaves a bound one with hazard ``ku``.
    """
    overrides = dict(overrides or {}, **kwargs)
    unknown = set(overrides) - set(REPRESSILATOR_DEFAULTS)
    if unknown:
        raise ModelError(f"unknown repressilator parameters {sorted(unknown)}")
    p = dict(REPRESSILATOR_DEFAULTS, **overrides)
    discrete = [DiscreteVariable(f"g{i}", ("free", "bound"), "free") for i in (1, 2, 3)]
    continuous = [ContinuousVariable(f"X{i}", float(p[f"X{i}_0"])) for i in (1, 2, 3)]
    flows = {f"X{i}": f"kp*ind(g{i}==free) - kd*X{i}" for i in (1, 2, 3)}
    jumps = []
    for i in (1, 2, 3):
        jumps.append(Jump(f"bind{i}", f"g{i}==free", f"kb*X{REPRESSOR[i]}", {f"g{i}": "bound"}))
        jumps.append(Jump(f"unbind{i}", f"g{i}==bound", "ku", {f"g{i}": "free"}))
    params = {k: p[k] for k in ("kp", "kd", "kb", "ku")}
    return HybridModel(discrete, continuous, flows, jumps, params)


BUILTINS = {"schlogl": builtin_schlogl, "repressilator": builtin_repressilator}
BUILTIN_FORMULAS = {
    "schlogl": (SCHLOGL_FORMULA, SCHLOGL_FORMULA_PARAMS),
    "repressilator": (REPRESSILATOR_FORMULA, REPRESSILATOR_FORMULA_PARAMS),
}
