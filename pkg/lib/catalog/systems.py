"""
Catalog of Rössler-like polynomial systems.

Every system is stored as a coefficient row of the general quadratic form

    x' = a2 y + a3 z + a4 xz + a5 z^2
    y' = b1 x + b2 y + b3 z + b4 y^2 + b5 z^2
    z' = c1 x + c2 y + c3 z + c4 xy + c5 xz + c6 x^2 + c7 y^2

(plus constant terms a0/b0/c0, used only by the uncentered Rössler system) and
turned into a VectorField by rendering the row to the field text format.
"""
import math
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from lib.errors import NotAFixedPointError, UnknownParameterError, UnknownSystemError
from lib.field.parser import field_from_components
from lib.field.polynomial import expand, to_expr
from lib.field.vector_field import VectorField

GENERAL_FORM = {
    "a0": (0, ""), "a2": (0, "y"), "a3": (0, "z"), "a4": (0, "x*z"), "a5": (0, "z^2"),
    "b0": (1, ""), "b1": (1, "x"), "b2": (1, "y"), "b3": (1, "z"), "b4": (1, "y^2"), "b5": (1, "z^2"),
    "c0": (2, ""), "c1": (2, "x"), "c2": (2, "y"), "c3": (2, "z"), "c4": (2, "x*y"), "c5": (2, "x*z"),
    "c6": (2, "x^2"), "c7": (2, "y^2"),
}

DEFAULT_TRANSIENT = 500.0
DEFAULT_T_END = 5000.0
DEFAULT_DT = 0.01
IC_OFFSET = 0.1
FIXED_POINT_TOLERANCE = 1e-9


def general_form(row: Mapping[str, str]) -> List[str]:
    """Render a coefficient row to three component expressions."""
    components: List[List[str]] = [[], [], []]
    for key, coefficient in row.items():
        if key not in GENERAL_FORM:
            raise ValueError(f"unknown general-form coefficient '{key}'")
        coefficient = str(coefficient).strip()
        if coefficient in ("", "0"):
            continue
        index, monomial = GENERAL_FORM[key]
        term = f"({coefficient})" if not monomial else f"({coefficient})*{monomial}"
        components[index].append(term)
    return [" + ".join(terms) if terms else "0" for terms in components]


def rossler_inner_fixed_point(params: Mapping[str, float]) -> Tuple[float, float, float]:
    """F_- of the uncentered Rössler system: x/a = -y = z = (c - sqrt(c^2 - 4ab)) / 2a."""
    a, b, c = params["a"], params["b"], params["c"]
    disc = c * c - 4.0 * a * b
    if disc < 0:
        raise ValueError(f"Rössler system has no real fixed point for a={a}, b={b}, c={c}")
    z_minus = (c - math.sqrt(disc)) / (2.0 * a)
    return a * z_minus, -z_minus, z_minus


def _rossler_b_tilde(params):
    return rossler_inner_fixed_point(params)[2]


def _rossler_c_tilde(params):
    return params["c"] - rossler_inner_fixed_point(params)[0]


class SectionHint:
    """Preferred Poincaré half-plane, relative to the inner fixed point."""

    def __init__(self, normal: Sequence[float], axis: Sequence[float], direction: str):
        self.normal = tuple(float(v) for v in normal)
        self.axis = tuple(float(v) for v in axis)
        self.direction = direction

    def to_dict(self):
        return {"normal": list(self.normal), "axis": list(self.axis), "direction": self.direction}

    def __repr__(self):
        return f"SectionHint(normal={self.normal}, axis={self.axis}, direction={self.direction!r})"


class SystemDef:
    def __init__(self, name: str, title: str, family: str, row: Mapping[str, str],
                 defaults: Mapping[str, float], fixed_point_count_expected: int,
                 inversion: str = "direct", derived: Optional[Mapping[str, Callable]] = None,
                 ic: Optional[Sequence[float]] = None, ic_rule: Optional[Callable] = None,
                 presets: Optional[Mapping[str, Mapping[str, float]]] = None,
                 notes: Sequence[str] = (), reference_w: Optional[float] = None,
                 expected_verdict: Optional[str] = None,
                 verdict_params: Optional[Mapping[str, float]] = None,
                 expects_spurious_mesh: bool = False,
                 section_hint: Optional[SectionHint] = None, listed: bool = True):
        self.name = name
        self.title = title
        self.family = family
        self.row = dict(row)
        self.defaults = dict(defaults)
        self.derived = dict(derived or {})
        self.fixed_point_count_expected = fixed_point_count_expected
        self.inversion = inversion
        self._ic = tuple(ic) if ic is not None else None
        self._ic_rule = ic_rule
        self.presets = {k: dict(v) for k, v in (presets or {}).items()}
        self.notes = list(notes)
        self.reference_w = reference_w
        self.expected_verdict = expected_verdict
        self.verdict_params = dict(verdict_params or {})
        self.expects_spurious_mesh = expects_spurious_mesh
        self.section_hint = section_hint
        self.listed = listed
        self.field: VectorField = field_from_components(general_form(self.row), self.defaults, self.derived)

    @property
    def params(self) -> List[str]:
        return list(self.defaults)

    def bind(self, overrides: Optional[Mapping[str, float]] = None, preset: Optional[str] = None):
        values = {}
        if preset is not None:
            if preset not in self.presets:
                known = ", ".join(self.presets) or "none"
                raise UnknownParameterError(f"system '{self.name}' has no preset '{preset}' (presets: {known})")
            values.update(self.presets[preset])
        values.update(overrides or {})
        return self.field.bind(values)

    def initial_condition(self, params: Optional[Mapping[str, float]] = None) -> np.ndarray:
        """Reference initial condition: the stated one, or the inner fixed point displaced by 0.1 per axis."""
        if self._ic is not None:
            return np.array(self._ic, dtype=float)
        if self._ic_rule is not None:
            base = np.asarray(self._ic_rule(params or self.field.bind()), dtype=float)
            return base + IC_OFFSET
        return np.full(3, IC_OFFSET)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "title": self.title,
            "params": self.params,
            "defaults": self.defaults,
            "fixed_point_count_expected": self.fixed_point_count_expected,
            "inversion": self.inversion,
        }

    def describe(self) -> dict:
        info = self.summary()
        info.update({
            "family": self.family,
            "coefficients": {k: v for k, v in self.row.items() if str(v).strip() not in ("", "0")},
            "derived_params": list(self.derived),
            "field": [str(e) for e in self.field.exprs],
            "default_ic": self.initial_condition().tolist(),
            "transient": DEFAULT_TRANSIENT,
            "presets": self.presets,
            "notes": self.notes,
            "reference_w": self.reference_w,
            "expected_verdict": self.expected_verdict,
            "verdict_params": self.verdict_params,
            "expects_spurious_mesh": self.expects_spurious_mesh,
            "section_hint": self.section_hint.to_dict() if self.section_hint else None,
        })
        return info

    def __repr__(self):
        return f"SystemDef({self.name!r}, params={self.defaults})"


_ROSSLER_PRESETS = {
    "two_branch": {"a": 0.432},
    "four_branch": {"a": 0.52},
    "crossing": {"a": 0.556},
    "no_crossing": {"a": 0.43295},
}
_ROSSLER_ROW_COMMON = {"a2": "-1", "a3": "-1", "b1": "1", "b2": "a"}
# half-plane y = y_fp on the side x < x_fp, crossed with y' < 0
_ROSSLER_SECTION = SectionHint(normal=(0.0, 1.0, 0.0), axis=(-1.0, 0.0, 0.0), direction="-")
# half-plane y = 0 on the side x > 0, where y' = -x - z < 0 since z > 0 on the attractor
_THOMAS_SECTION = SectionHint(normal=(0.0, 1.0, 0.0), axis=(1.0, 0.0, 0.0), direction="-")


def _two_point(name, title, row, defaults, reference_w, verdict, notes=(), spurious=False):
    return SystemDef(name, title, "two-point", row, defaults, 2, reference_w=reference_w,
                     expected_verdict=verdict, notes=notes, expects_spurious_mesh=spurious)


def _one_point(name, title, row, defaults, verdict, inversion="direct", notes=(), spurious=False,
               derived=None, ic=None, section_hint=None):
    return SystemDef(name, title, "one-point", row, defaults, 1, inversion=inversion, derived=derived, ic=ic,
                     expected_verdict=verdict, notes=notes, expects_spurious_mesh=spurious,
                     section_hint=section_hint)


def _build_catalog() -> Dict[str, SystemDef]:
    systems = [
        SystemDef(
            "rossler", "Rössler (uncentered)", "two-point",
            dict(_ROSSLER_ROW_COMMON, c0="b", c3="-c", c5="1"),
            {"a": 0.432, "b": 2.0, "c": 4.0}, 2,
            ic_rule=rossler_inner_fixed_point, presets=_ROSSLER_PRESETS,
            expected_verdict="crossing", verdict_params={"a": 0.556},
            section_hint=_ROSSLER_SECTION,
            notes=["original form; the catalog entry rossler_centered is its translation to F_-"],
        ),
        SystemDef(
            "rossler_centered", "Rössler (centered on F_-)", "two-point",
            dict(_ROSSLER_ROW_COMMON, c1="b_tilde", c3="-c_tilde", c5="1"),
            {"a": 0.432, "b": 2.0, "c": 4.0}, 2,
            derived={"b_tilde": _rossler_b_tilde, "c_tilde": _rossler_c_tilde},
            presets=_ROSSLER_PRESETS, expected_verdict="crossing", verdict_params={"a": 0.556},
            section_hint=_ROSSLER_SECTION, listed=False,
            notes=["b_tilde = z_- and c_tilde = c - x_- are derived from a, b, c"],
        ),
        _two_point("sprott_f", "Sprott F", {"a2": "-1", "a3": "1", "b1": "1", "b2": "a", "c3": "-1", "c6": "1"},
                {"a": 0.5}, 59.4, "wrapping"),
        _two_point("sprott_g", "Sprott G", {"a2": "-1", "a3": "1", "b1": "1", "b2": "a", "c3": "-b", "c4": "1"},
                {"a": 0.42, "b": 1.29}, 21.3, "crossing",
                notes=["computed W at the default parameters is about 26, above the quoted 21.3"]),
        _two_point("sprott_h", "Sprott H", {"a2": "-1", "a5": "1", "b1": "1", "b2": "a", "c1": "1", "c3": "-1"},
                {"a": 0.5}, 48.5, "wrapping"),
        _two_point("sprott_k", "Sprott K", {"a2": "-1", "a4": "1", "b1": "1", "b2": "a", "c1": "1", "c3": "-b"},
                {"a": 0.35, "b": 0.5}, 27.1, "crossing", spurious=True),
        _two_point("sprott_m", "Sprott M", {"a2": "-1", "b1": "a", "b3": "1", "c1": "b", "c3": "-1", "c6": "-1"},
                {"a": 1.95, "b": 1.65}, 14.0, "crossing"),
        _two_point("sprott_o", "Sprott O", {"a2": "1", "b1": "1", "b3": "-1", "c1": "1", "c2": "a", "c5": "1"},
                {"a": 2.67}, 4.3, "crossing",
                notes=["the reference parameter set also quotes b=0.5 but the coefficient row has a single parameter a; "
                       "only a is exposed"]),
        _two_point("sprott_p", "Sprott P", {"a2": "a", "a3": "1", "b1": "-1", "b4": "1", "c1": "1", "c2": "1"},
                {"a": 2.68}, 8.5, "crossing"),
        _two_point("sprott_q", "Sprott Q", {"a2": "-1", "b1": "a", "b2": "b", "b5": "1", "c1": "1", "c3": "-1"},
                {"a": 3.1, "b": 0.5}, 0.2, "wrapping",
                notes=["computed W at the default parameters is about 9.5, far from the quoted 0.2"]),
        _two_point("sprott_s", "Sprott S", {"a2": "1", "b2": "-a", "b3": "-b", "c1": "2", "c2": "1", "c6": "1"},
                {"a": 0.99, "b": 3.8}, 3.8, "crossing"),
        _one_point("sprott_d", "Sprott D", {"a2": "-1", "b1": "1", "b3": "1", "c2": "1", "c3": "a", "c7": "1"},
                {"a": 2.3}, "wrapping", spurious=True,
                notes=["with the tabulated row the complex pair at the fixed point has Re about -0.165, "
                       "not a pure imaginary pair",
                       "the fixed point also has a real eigenvalue near +2.63; from the reference initial "
                       "condition the trajectory diverges near t = 2.5, so no verdict is produced"]),
        _one_point("sprott_i", "Sprott I", {"a2": "-a", "b1": "1", "b3": "1", "c1": "1", "c3": "-1", "c7": "1"},
                {"a": 0.25}, "wrapping"),
        _one_point("sprott_j", "Sprott J", {"a2": "a", "b1": "-1", "b3": "1", "b5": "1", "c2": "1", "c3": "-a"},
                {"a": 1.76}, "crossing",
                notes=["the tabulated row is linear; the z^2 term of the y equation is restored (b5 = +1, c1 = 0)"]),
        _one_point("sprott_r", "Sprott R", {"a2": "-1", "b3": "1", "c1": "a", "c2": "-b_over_a", "c3": "-1", "c4": "1"},
                {"a": 0.90, "b": 0.395}, "wrapping", spurious=True,
                derived={"b_over_a": lambda p: p["b"] / p["a"]}),
        _one_point("thomas", "Thomas", {"a2": "1", "b1": "-1", "b2": "a", "b3": "-1", "c3": "-c", "c7": "1"},
                {"a": 0.28, "c": 2.0}, "crossing", section_hint=_THOMAS_SECTION),
        _one_point("sprott_l", "Sprott L", {"a2": "-1", "b1": "a", "b3": "1", "c2": "2*b", "c3": "-1", "c7": "b"},
                {"a": 3.87, "b": 0.91}, "wrapping", inversion="inverted"),
        _one_point("sprott_n", "Sprott N", {"a2": "-a", "b1": "1", "b3": "two_over_a", "b5": "1", "c2": "1", "c3": "-a"},
                {"a": 4.2}, "wrapping", inversion="inverted",
                derived={"two_over_a": lambda p: 2.0 / p["a"]}),
        _one_point("malasoma_a", "Malasoma A", {"a2": "1", "b2": "-a", "b3": "1", "c1": "-1", "c4": "1"},
                {"a": 2.017}, "crossing", inversion="inverted", spurious=True, ic=(0.1, 1.0, 1.9)),
        _one_point("malasoma_b", "Malasoma B", {"a3": "1", "b2": "-a", "b3": "1", "c1": "-1", "c4": "1"},
                {"a": 2.017}, None, inversion="inverted",
                notes=["no reference initial condition, verdict or branch count"]),
    ]
    return {s.name: s for s in systems}


CATALOG: Dict[str, SystemDef] = _build_catalog()


def list_systems(include_hidden: bool = False) -> List[SystemDef]:
    return [s for s in CATALOG.values() if s.listed or include_hidden]


def get_system(name: str) -> SystemDef:
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownSystemError(f"unknown system '{name}' (see `systems list --all`)") from None


def build(name: str, param_overrides: Optional[Mapping[str, float]] = None,
          preset: Optional[str] = None) -> Tuple[VectorField, Dict[str, float]]:
    system = get_system(name)
    return system.field, system.bind(param_overrides, preset)


def center(f: VectorField, params: Mapping[str, float], fp) -> VectorField:
    """Translate the field so that `fp` sits at the origin: g(X) = F(X + fp), parameters folded in."""
    fp = np.asarray(fp, dtype=float)
    residual = np.linalg.norm(f.evaluate(fp, params))
    if residual >= FIXED_POINT_TOLERANCE:
        raise NotAFixedPointError(f"{fp.tolist()} is not a fixed point (|F| = {residual:.3e})")
    exprs = []
    for e in f.exprs:
        poly = expand(e, params, fp)
        # F(fp) vanishes up to rounding; keep g(0) = 0 exactly
        poly.pop((0, 0, 0), None)
        exprs.append(to_expr(poly))
    return VectorField(exprs)
