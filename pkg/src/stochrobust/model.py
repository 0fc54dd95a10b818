"""Population reaction networks and piecewise-deterministic hybrid models.

Both model kinds are immutable once built.  Rate, flow and hazard
expressions are compiled twice: to plain Python callables for the
interrogation API (:meth:`ReactionNetwork.propensity` and friends) and to
numba kernels used by the simulators.
"""

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import expr
from .errors import ModelError, ModelEvaluationError, ModelSyntaxError

__all__ = [
    "Species",
    "Reaction",
    "ReactionNetwork",
    "DiscreteVariable",
    "ContinuousVariable",
    "Jump",
    "HybridModel",
    "parse_model",
    "render",
    "to_json",
    "from_json",
    "model_hash",
    "propensity",
    "fluid_vector_field",
]

_JIT_CACHE = {}


def _jit(name, args, lines):
    key = (name, tuple(lines))
    fn = _JIT_CACHE.get(key)
    if fn is None:
        fn = expr.compile_function(name, args, lines, numba_jit=True)
        _JIT_CACHE[key] = fn
    return fn


# ---------------------------------------------------------------------------
# Reaction networks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Species:
    name: str
    initial: int
    constant: bool = False


@dataclass(frozen=True)
class Reaction:
    """One reaction; ``law`` is ``"mass_action"`` or ``"expr"``.

    For mass action, ``rate`` is an expression over parameters giving the
    stochastic rate constant; for ``expr`` it is the full propensity.
    """

    name: str
    reactants: dict
    products: dict
    law: str
    rate: str

    def __post_init__(self):
        if self.law not in ("mass_action", "expr"):
            raise ModelError(f"reaction {self.name!r}: unknown rate law {self.law!r}")
        for side in (self.reactants, self.products):
            for sp, k in side.items():
                if int(k) != k or k < 0:
                    raise ModelError(f"reaction {self.name!r}: bad stoichiometry {k!r} for {sp!r}")
        object.__setattr__(self, "reactants", dict({s: int(k) for s, k in self.reactants.items() if k}))
        object.__setattr__(self, "products", dict({s: int(k) for s, k in self.products.items() if k}))

    def __eq__(self, other):
        if not isinstance(other, Reaction):
            return NotImplemented
        return (
            self.name == other.name
            and dict(self.reactants) == dict(other.reactants)
            and dict(self.products) == dict(other.products)
            and self.law == other.law
            and self.rate.replace(" ", "") == other.rate.replace(" ", "")
        )

    __hash__ = None


def _falling(code, r):
    """binom(x, r) as a product of falling factors over r!."""
    if r == 1:
        return code
    factors = " * ".join([code] + [f"({code} - {float(i)!r})" for i in range(1, r)])
    return f"({factors} / {float(math.factorial(r))!r})"


@dataclass(frozen=True, eq=False)
class ReactionNetwork:
    """A population CTMC described by reactions.

    Species flagged ``constant`` keep their count forever: their entries of
    every update vector are zero, but they still enter rate laws.
    """

    species: tuple
    reactions: tuple = ()
    parameters: dict = field(default_factory=dict)

    update: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "parameters", dict({k: float(v) for k, v in self.parameters.items()}))
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ModelError("duplicate species names")
        for s in self.species:
            if not expr.is_identifier(s.name):
                raise ModelError(f"invalid species name {s.name!r}")
            if int(s.initial) != s.initial or s.initial < 0:
                raise ModelError(f"species {s.name!r}: initial count must be a nonnegative integer")
        clash = set(names) & set(self.parameters)
        if clash:
            raise ModelError(f"names used both as species and parameter: {sorted(clash)}")
        rnames = [r.name for r in self.reactions]
        if len(set(rnames)) != len(rnames):
            raise ModelError("duplicate reaction names")
        index = {n: i for i, n in enumerate(names)}
        for r in self.reactions:
            for sp in list(r.reactants) + list(r.products):
                if sp not in index:
                    raise ModelError(f"reaction {r.name!r} references undeclared species {sp!r}")
            allowed = set(self.parameters) if r.law == "mass_action" else set(self.parameters) | set(names)
            bad = expr.names_in(r.rate) - allowed
            if bad:
                raise ModelError(f"reaction {r.name!r}: rate references undeclared names {sorted(bad)}")

        update = np.zeros((len(self.reactions), len(self.species)), dtype=np.int64)
        for j, r in enumerate(self.reactions):
            for sp, k in r.products.items():
                update[j, index[sp]] += k
            for sp, k in r.reactants.items():
                update[j, index[sp]] -= k
        for i, s in enumerate(self.species):
            if s.constant:
                update[:, i] = 0
        update.setflags(write=False)
        object.__setattr__(self, "update", update)

        # generated source for propensities (stochastic) and fluid rates
        names_map = {n: f"x[{i}]" for i, n in enumerate(names)}
        names_map.update({p: f"p[{k}]" for k, p in enumerate(self.parameters)})
        tr = expr.Translator(names_map)
        stoch, fluid = [], []
        for r in self.reactions:
            rate = tr(r.rate)
            if r.law == "expr":
                stoch.append(rate)
                fluid.append(rate)
                continue
            s_terms, f_terms = [rate], [rate]
            for sp, k in r.reactants.items():
                code = names_map[sp]
                s_terms.append(_falling(code, k))
                f_terms.append(code if k == 1 else f"{code} ** {float(k)!r}")
            stoch.append(" * ".join(s_terms))
            fluid.append(" * ".join(f_terms))
        object.__setattr__(self, "_stoch_src", tuple(stoch))
        object.__setattr__(self, "_fluid_src", tuple(fluid))
        object.__setattr__(self, "_py", {})

    # -- structural equality (numpy fields excluded) ------------------------
    def __eq__(self, other):
        if not isinstance(other, ReactionNetwork):
            return NotImplemented
        return (
            self.species == other.species
            and self.reactions == other.reactions
            and dict(self.parameters) == dict(other.parameters)
        )

    __hash__ = None

    def __getstate__(self):
        return {"species": self.species, "reactions": self.reactions, "parameters": dict(self.parameters)}

    def __setstate__(self, state):
        self.__init__(**state)

    # -- accessors ----------------------------------------------------------
    @property
    def species_names(self):
        return [s.name for s in self.species]

    def species_index(self, name):
        for i, s in enumerate(self.species):
            if s.name == name:
                return i
        raise ModelError(f"unknown species {name!r}")

    def initial_state(self):
        return np.array([s.initial for s in self.species], dtype=np.float64)

    def parameter_vector(self):
        return np.array(list(self.parameters.values()), dtype=np.float64)

    def with_parameters(self, overrides=None, **kwargs):
        """Copy with some parameter values replaced."""
        overrides = dict(overrides or {}, **kwargs)
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise ModelError(f"unknown parameters {sorted(unknown)}")
        params = dict(self.parameters)
        params.update({k: float(v) for k, v in overrides.items()})
        return ReactionNetwork(self.species, self.reactions, params)

    def with_initial(self, **counts):
        unknown = set(counts) - set(self.species_names)
        if unknown:
            raise ModelError(f"unknown species {sorted(unknown)}")
        species = [Species(s.name, counts.get(s.name, s.initial), s.constant) for s in self.species]
        return ReactionNetwork(species, self.reactions, self.parameters)

    # -- evaluation ---------------------------------------------------------
    def _scalar(self, kind, j):
        key = (kind, j)
        fn = self._py.get(key)
        if fn is None:
            src = self._stoch_src[j] if kind == "stoch" else self._fluid_src[j]
            fn = expr.compile_function("_rate", ["x", "p"], [f"return {src}"])
            self._py[key] = fn
        return fn

    def _state(self, state):
        x = np.asarray(state, dtype=np.float64)
        if x.shape != (len(self.species),):
            raise ModelError(f"state must have {len(self.species)} entries, got shape {x.shape}")
        return x

    def _evaluate(self, kind, j, x):
        try:
            with np.errstate(all="ignore"):
                value = self._scalar(kind, j)(x, self.parameter_vector())
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise ModelEvaluationError(f"reaction {self.reactions[j].name!r}: {exc}") from None
        if not math.isfinite(value) or value < 0:
            raise ModelEvaluationError(f"reaction {self.reactions[j].name!r}: rate evaluated to {value!r}")
        return float(value)

    def propensity(self, j, state):
        """Stochastic propensity of reaction ``j`` at the count vector ``state``."""
        x = self._state(state)
        if np.any(x < 0):
            raise ModelError("species counts must be nonnegative")
        return self._evaluate("stoch", j, x)

    def propensities(self, state):
        x = self._state(state)
        return np.array([self._evaluate("stoch", j, x) for j in range(len(self.reactions))])

    def fluid_vector_field(self, state):
        """Drift ``sum_l v_l f_l(x)`` with mass action read as ``c * prod x_i**r_i``."""
        x = self._state(state)
        rates = np.array([self._evaluate("fluid", j, x) for j in range(len(self.reactions))])
        return self.update.T.astype(np.float64) @ rates if len(rates) else np.zeros(len(x))

    def kernel(self):
        """numba propensity kernel ``prop(x, p, out) -> status``.

        ``status`` is 0, or ``j + 1`` when reaction ``j`` produced a negative
        or non-finite value.
        """
        lines = [f"out[{j}] = {src}" for j, src in enumerate(self._stoch_src)]
        lines += [
            f"for j in range({len(self._stoch_src)}):",
            "    v = out[j]",
            "    if not (v >= 0.0 and v < inf):",
            "        return j + 1",
            "return 0",
        ]
        return _jit("_prop", ["x", "p", "out"], lines)


def propensity(network, j, state):
    return network.propensity(j, state)


def fluid_vector_field(network, state):
    return network.fluid_vector_field(state)


# ---------------------------------------------------------------------------
# Hybrid models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteVariable:
    name: str
    domain: tuple
    initial: str = None

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        if len(self.domain) == 0 or len(set(self.domain)) != len(self.domain):
            raise ModelError(f"discrete variable {self.name!r}: domain must be nonempty and distinct")
        if self.initial is None:
            object.__setattr__(self, "initial", self.domain[0])
        if self.initial not in self.domain:
            raise ModelError(f"discrete variable {self.name!r}: initial value {self.initial!r} not in domain")


@dataclass(frozen=True)
class ContinuousVariable:
    name: str
    initial: float = 0.0


@dataclass(frozen=True)
class Jump:
    """A stochastic discrete transition enabled when ``guard`` holds."""

    name: str
    guard: str
    rate: str
    reset: dict

    def __post_init__(self):
        object.__setattr__(self, "reset", dict(self.reset))

    def __eq__(self, other):
        if not isinstance(other, Jump):
            return NotImplemented
        strip = lambda s: (s or "").replace(" ", "")  # noqa: E731
        return (
            self.name == other.name
            and strip(self.guard) == strip(other.guard)
            and strip(self.rate) == strip(other.rate)
            and dict(self.reset) == dict(other.reset)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class HybridModel:
    """Piecewise-deterministic Markov process.

    Continuous variables follow ``flows`` (one expression per variable, which
    may switch on the mode through ``ind(g == value)``); discrete variables
    change only through jumps.
    """

    discrete: tuple
    continuous: tuple
    flows: dict
    jumps: tuple = ()
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "discrete", tuple(self.discrete))
        object.__setattr__(self, "continuous", tuple(self.continuous))
        object.__setattr__(self, "jumps", tuple(self.jumps))
        object.__setattr__(self, "parameters", dict({k: float(v) for k, v in self.parameters.items()}))
        dnames = [d.name for d in self.discrete]
        cnames = [c.name for c in self.continuous]
        allnames = dnames + cnames + list(self.parameters)
        if len(set(allnames)) != len(allnames):
            raise ModelError("duplicate variable or parameter names")
        flows = dict(self.flows)
        unknown = set(flows) - set(cnames)
        if unknown:
            raise ModelError(f"flows given for undeclared continuous variables {sorted(unknown)}")
        for c in cnames:
            flows.setdefault(c, "0")
        object.__setattr__(self, "flows", dict({c: flows[c] for c in cnames}))

        names_map = {n: f"x[{i}]" for i, n in enumerate(cnames)}
        names_map.update({n: f"d[{i}]" for i, n in enumerate(dnames)})
        names_map.update({p: f"p[{k}]" for k, p in enumerate(self.parameters)})
        symbols = {d.name: {v: str(k) for k, v in enumerate(d.domain)} for d in self.discrete}
        tr = expr.Translator(names_map, symbols)

        flow_src = [tr(self.flows[c]) for c in cnames]
        haz_src, guard_src = [], []
        reset = np.full((len(self.jumps), len(self.discrete)), -1, dtype=np.int64)
        jnames = [j.name for j in self.jumps]
        if len(set(jnames)) != len(jnames):
            raise ModelError("duplicate jump names")
        for k, jmp in enumerate(self.jumps):
            haz_src.append(tr(jmp.rate))
            guard_src.append(tr.condition(jmp.guard) if jmp.guard else "True")
            for var, val in jmp.reset.items():
                if var in cnames:
                    raise ModelError(f"jump {jmp.name!r}: resets of continuous variables are not supported")
                if var not in dnames:
                    raise ModelError(f"jump {jmp.name!r}: reset of undeclared variable {var!r}")
                dv = self.discrete[dnames.index(var)]
                if val not in dv.domain:
                    raise ModelError(f"jump {jmp.name!r}: {val!r} is not a value of {var!r}")
                reset[k, dnames.index(var)] = dv.domain.index(val)
        reset.setflags(write=False)
        object.__setattr__(self, "reset_matrix", reset)
        object.__setattr__(self, "_flow_src", tuple(flow_src))
        object.__setattr__(self, "_haz_src", tuple(haz_src))
        object.__setattr__(self, "_guard_src", tuple(guard_src))
        object.__setattr__(self, "_py", {})

    def __eq__(self, other):
        if not isinstance(other, HybridModel):
            return NotImplemented
        strip = lambda s: s.replace(" ", "")  # noqa: E731
        return (
            self.discrete == other.discrete
            and self.continuous == other.continuous
            and {k: strip(v) for k, v in self.flows.items()} == {k: strip(v) for k, v in other.flows.items()}
            and self.jumps == other.jumps
            and dict(self.parameters) == dict(other.parameters)
        )

    __hash__ = None

    def __getstate__(self):
        return {
            "discrete": self.discrete,
            "continuous": self.continuous,
            "flows": dict(self.flows),
            "jumps": [Jump(j.name, j.guard, j.rate, dict(j.reset)) for j in self.jumps],
            "parameters": dict(self.parameters),
        }

    def __setstate__(self, state):
        self.__init__(**state)

    @property
    def continuous_names(self):
        return [c.name for c in self.continuous]

    @property
    def discrete_names(self):
        return [d.name for d in self.discrete]

    def initial_continuous(self):
        return np.array([c.initial for c in self.continuous], dtype=np.float64)

    def initial_discrete(self):
        return np.array([d.domain.index(d.initial) for d in self.discrete], dtype=np.int64)

    def parameter_vector(self):
        return np.array(list(self.parameters.values()), dtype=np.float64)

    def with_parameters(self, overrides=None, **kwargs):
        overrides = dict(overrides or {}, **kwargs)
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise ModelError(f"unknown parameters {sorted(unknown)}")
        params = dict(self.parameters)
        params.update({k: float(v) for k, v in overrides.items()})
        state = self.__getstate__()
        state["parameters"] = params
        return HybridModel(**state)

    def with_initial(self, **values):
        cont = []
        for c in self.continuous:
            cont.append(ContinuousVariable(c.name, float(values.pop(c.name, c.initial))))
        disc = []
        for d in self.discrete:
            disc.append(DiscreteVariable(d.name, d.domain, values.pop(d.name, d.initial)))
        if values:
            raise ModelError(f"unknown variables {sorted(values)}")
        state = self.__getstate__()
        state.update(continuous=cont, discrete=disc)
        return HybridModel(**state)

    def _discrete_state(self, mode):
        if isinstance(mode, dict):
            out = []
            for d in self.discrete:
                val = mode.get(d.name, d.initial)
                if val not in d.domain:
                    raise ModelError(f"{val!r} is not a value of {d.name!r}")
                out.append(d.domain.index(val))
            return np.array(out, dtype=np.int64)
        return np.asarray(mode, dtype=np.int64)

    def _py_fn(self, key, lines):
        fn = self._py.get(key)
        if fn is None:
            fn = expr.compile_function("_f", ["x", "d", "p"], lines)
            self._py[key] = fn
        return fn

    def flow(self, x, mode):
        """Vector field at continuous state ``x`` in discrete state ``mode``.

        ``mode`` is a mapping ``{var: value}`` or an index vector.
        """
        x = np.asarray(x, dtype=np.float64)
        d = self._discrete_state(mode)
        out = np.array([self._py_fn(("flow", i), [f"return {s}"])(x, d, self.parameter_vector())
                        for i, s in enumerate(self._flow_src)])
        if not np.all(np.isfinite(out)):
            raise ModelEvaluationError("flow evaluated to a non-finite value")
        return out

    def hazards(self, x, mode):
        """Instantaneous jump hazards (zero for jumps whose guard is false)."""
        x = np.asarray(x, dtype=np.float64)
        d = self._discrete_state(mode)
        out = []
        for k, (g, h) in enumerate(zip(self._guard_src, self._haz_src)):
            val = self._py_fn(("haz", k), [f"return ({h}) if {g} else 0.0"])(x, d, self.parameter_vector())
            if not math.isfinite(val) or val < 0:
                raise ModelEvaluationError(f"jump {self.jumps[k].name!r}: hazard evaluated to {val!r}")
            out.append(val)
        return np.array(out)

    def kernels(self):
        """numba ``flow(x, d, p, out)`` and ``hazard(x, d, p, out)``; both return a status code."""
        n, m = len(self._flow_src), len(self._haz_src)
        flow_lines = [f"out[{i}] = {s}" for i, s in enumerate(self._flow_src)]
        flow_lines += [
            f"for i in range({n}):",
            "    if not (abs(out[i]) < inf):",
            "        return i + 1",
            "return 0",
        ]
        haz_lines = [f"out[{k}] = ({h}) if {g} else 0.0" for k, (g, h) in enumerate(zip(self._guard_src, self._haz_src))]
        haz_lines += [
            f"for k in range({m}):",
            "    v = out[k]",
            "    if not (v >= 0.0 and v < inf):",
            "        return k + 1",
            "return 0",
        ]
        return _jit("_flow", ["x", "d", "p", "out"], flow_lines), _jit("_hazard", ["x", "d", "p", "out"], haz_lines)


# ---------------------------------------------------------------------------
# Text grammar
# ---------------------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_RE = {
    "species": re.compile(rf"(species|const)\s+({_NAME})\s*=\s*(\S+)\Z", re.S),
    "param": re.compile(rf"param\s+({_NAME})\s*=\s*(\S+)\Z", re.S),
    "reaction": re.compile(rf"reaction\s+({_NAME})\s*:(.*?)->(.*?)@\s*(mass_action|expr)\s*\((.*)\)\Z", re.S),
    "discrete": re.compile(rf"discrete\s+({_NAME})\s+in\s*\{{([^}}]*)\}}\s*(?:=\s*({_NAME}))?\Z", re.S),
    "continuous": re.compile(rf"continuous\s+({_NAME})\s*=\s*(\S+)\Z", re.S),
    "flow": re.compile(rf"flow\s+({_NAME})\s*=(.+)\Z", re.S),
    "jump": re.compile(rf"jump\s+({_NAME})\s*:\s*(?:when\s+(.*?)\s+)?rate\s+(.*?)\s+set\s+(.+)\Z", re.S),
}
_TERM = re.compile(rf"\s*(\d+)?\s*\*?\s*({_NAME})\s*\Z")


def _statements(text):
    """Yield ``(statement, line, column)`` with comments removed."""
    clean = re.sub(r"#[^\n]*", lambda m: " " * len(m.group()), text)
    start = 0
    for piece in clean.split(";"):
        stripped = piece.strip()
        if stripped:
            offset = start + (len(piece) - len(piece.lstrip()))
            line = clean.count("\n", 0, offset) + 1
            col = offset - (clean.rfind("\n", 0, offset) + 1) + 1
            yield " ".join(stripped.split()), line, col
        start += len(piece) + 1


def _side(text, line, col):
    text = text.strip()
    out = {}
    if text in ("", "0", "∅"):
        return out
    for term in text.split("+"):
        m = _TERM.match(term)
        if not m:
            raise ModelSyntaxError(f"bad reaction term {term.strip()!r}", line, col)
        k = int(m.group(1)) if m.group(1) else 1
        out[m.group(2)] = out.get(m.group(2), 0) + k
    return out


def _number(text, what, line, col):
    try:
        return float(text)
    except ValueError:
        raise ModelSyntaxError(f"{what}: expected a number, got {text!r}", line, col) from None


def _parse_text(text):
    species, params, reactions = [], {}, []
    discrete, continuous, flows, jumps = [], [], {}, []
    for stmt, line, col in _statements(text):
        keyword = stmt.split(None, 1)[0]
        kind = "species" if keyword in ("species", "const") else keyword
        pattern = _RE.get(kind)
        m = pattern.match(stmt) if pattern else None
        if m is None:
            raise ModelSyntaxError(f"cannot parse statement {stmt!r}", line, col)
        try:
            if kind == "species":
                value = _number(m.group(3), m.group(2), line, col)
                if value < 0:
                    raise ModelError(f"species {m.group(2)!r}: negative initial count {m.group(3)}")
                if value != int(value):
                    raise ModelError(f"species {m.group(2)!r}: initial count must be an integer")
                species.append(Species(m.group(2), int(value), m.group(1) == "const"))
            elif kind == "param":
                params[m.group(1)] = _number(m.group(2), m.group(1), line, col)
            elif kind == "reaction":
                reactions.append(
                    Reaction(
                        m.group(1),
                        _side(m.group(2), line, col),
                        _side(m.group(3), line, col),
                        m.group(4),
                        m.group(5).strip(),
                    )
                )
            elif kind == "discrete":
                domain = tuple(v.strip() for v in m.group(2).split(",") if v.strip())
                discrete.append(DiscreteVariable(m.group(1), domain, m.group(3)))
            elif kind == "continuous":
                continuous.append(ContinuousVariable(m.group(1), _number(m.group(2), m.group(1), line, col)))
            elif kind == "flow":
                flows[m.group(1)] = m.group(2).strip()
            elif kind == "jump":
                reset = {}
                for assign in m.group(4).split(","):
                    var, _, val = assign.partition("=")
                    if not val:
                        raise ModelSyntaxError(f"bad reset {assign.strip()!r}", line, col)
                    reset[var.strip()] = val.strip()
                jumps.append(Jump(m.group(1), (m.group(2) or "").strip(), m.group(3).strip(), reset))
        except ModelError as exc:
            if isinstance(exc, ModelSyntaxError):
                raise
            raise ModelError(f"line {line}: {exc}") from None
    hybrid = discrete or continuous or flows or jumps
    if hybrid and (species or reactions):
        raise ModelError("a document may define either a reaction network or a hybrid model, not both")
    if hybrid:
        return HybridModel(discrete, continuous, flows, jumps, params)
    return ReactionNetwork(species, reactions, params)


def parse_model(text):
    """Parse a model document (text grammar or its JSON mirror)."""
    if text.lstrip().startswith("{"):
        return from_json(text)
    return _parse_text(text)


def _side_text(side):
    return " + ".join(f"{k} {sp}" if k != 1 else sp for sp, k in side.items())


def render(model):
    """Text-grammar rendering; ``parse_model(render(m)) == m``."""
    lines = []
    if isinstance(model, ReactionNetwork):
        for s in model.species:
            lines.append(f"{'const' if s.constant else 'species'} {s.name} = {s.initial};")
        for k, v in model.parameters.items():
            lines.append(f"param {k} = {v!r};")
        for r in model.reactions:
            lines.append(f"reaction {r.name}: {_side_text(r.reactants)} -> {_side_text(r.products)} @ {r.law}({r.rate});")
    else:
        for d in model.discrete:
            lines.append(f"discrete {d.name} in {{{','.join(d.domain)}}} = {d.initial};")
        for c in model.continuous:
            lines.append(f"continuous {c.name} = {c.initial!r};")
        for k, v in model.parameters.items():
            lines.append(f"param {k} = {v!r};")
        for c, f in model.flows.items():
            lines.append(f"flow {c} = {f};")
        for j in model.jumps:
            when = f"when {j.guard} " if j.guard else ""
            sets = ", ".join(f"{k}={v}" for k, v in j.reset.items())
            lines.append(f"jump {j.name}: {when}rate {j.rate} set {sets};")
    return "\n".join(lines) + "\n"


def _as_dict(model):
    if isinstance(model, ReactionNetwork):
        return {
            "kind": "reaction_network",
            "species": [{"name": s.name, "initial": s.initial, "constant": s.constant} for s in model.species],
            "parameters": dict(model.parameters),
            "reactions": [
                {
                    "name": r.name,
                    "reactants": dict(r.reactants),
                    "products": dict(r.products),
                    "law": r.law,
                    "rate": r.rate,
                }
                for r in model.reactions
            ],
        }
    return {
        "kind": "hybrid",
        "discrete": [{"name": d.name, "domain": list(d.domain), "initial": d.initial} for d in model.discrete],
        "continuous": [{"name": c.name, "initial": c.initial} for c in model.continuous],
        "parameters": dict(model.parameters),
        "flows": dict(model.flows),
        "jumps": [{"name": j.name, "guard": j.guard, "rate": j.rate, "reset": dict(j.reset)} for j in model.jumps],
    }


def to_json(model, indent=2):
    return json.dumps(_as_dict(model), indent=indent)


def from_json(text):
    try:
        doc = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    kind = doc.get("kind")
    try:
        if kind == "reaction_network":
            species = []
            for s in doc["species"]:
                if s["initial"] < 0:
                    raise ModelError(f"species {s['name']!r}: negative initial count")
                species.append(Species(s["name"], s["initial"], bool(s.get("constant", False))))
            reactions = [
                Reaction(r["name"], r.get("reactants", {}), r.get("products", {}), r["law"], r["rate"])
                for r in doc.get("reactions", [])
            ]
            return ReactionNetwork(species, reactions, doc.get("parameters", {}))
        if kind == "hybrid":
            return HybridModel(
                [DiscreteVariable(d["name"], d["domain"], d.get("initial")) for d in doc.get("discrete", [])],
                [ContinuousVariable(c["name"], float(c["initial"])) for c in doc.get("continuous", [])],
                doc.get("flows", {}),
                [Jump(j["name"], j.get("guard", ""), j["rate"], j.get("reset", {})) for j in doc.get("jumps", [])],
                doc.get("parameters", {}),
            )
    except KeyError as exc:
        raise ModelError(f"missing field {exc.args[0]!r} in model JSON") from None
    raise ModelError(f"unknown model kind {kind!r}")


def model_hash(model):
    """Stable short digest of the model definition."""
    canon = json.dumps(_as_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
