"""Initial-shape library: support functions of balls, ellipsoids, smooth cubes and sums.

Compact syntax ``kind:args[@center]`` joined by ``+`` for Minkowski sums::

    ball:1.3
    ellipsoid:2,1@0.3,-0.2
    cube:4,1               (p, scale)
    perturbed:1,2,0.3      (r, harmonic index, amplitude)
    ellipsoid:2,1+ball:0.5
"""

from __future__ import annotations

import logging

import numpy as np
from pydantic import TypeAdapter, ValidationError
from scipy.special import eval_legendre

from convexflow.errors import InvalidConfig
from convexflow.geometry import validate_strict_convexity
from convexflow.models import (
    BallSpec,
    CubeSpec,
    EllipsoidSpec,
    PerturbedSpec,
    ShapeSpec,
    SumSpec,
)
from convexflow.sphere_grid import SphereGrid

logger = logging.getLogger(__name__)

CATALOG: dict[int, dict[str, str]] = {
    1: {
        "ball": "ball:1",
        "ellipse": "ellipsoid:2,1",
        "ellipse-shifted": "ellipsoid:2,1@0.3,-0.2",
        "thin-ellipse": "ellipsoid:3,1",
        "cube": "cube:4,1",
        "perturbed": "perturbed:1,3,0.05",
        "sum": "ellipsoid:2,1+ball:0.5",
    },
    2: {
        "ball": "ball:1",
        "ellipsoid": "ellipsoid:1.5,1.2,1.0",
        "ellipsoid-shifted": "ellipsoid:1.5,1.2,1.0@0.1,0.2,-0.1",
        "cube": "cube:4,1",
        "perturbed": "perturbed:1,3,0.05",
        "sum": "ellipsoid:1.5,1.2,1.0+ball:0.5",
    },
}

_ARITY = {"ball": (1,), "cube": (2,), "perturbed": (3,)}

_shape_adapter: TypeAdapter = TypeAdapter(ShapeSpec)


def _numbers(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InvalidConfig(f"malformed numbers in {what}: {text!r}", key="shape") from None


def _parse_term(term: str) -> ShapeSpec:
    body, _, center_text = term.partition("@")
    kind, _, args_text = body.partition(":")
    kind = kind.strip().lower()
    args = _numbers(args_text, kind)
    center = tuple(_numbers(center_text, "center")) if center_text else None

    if kind in _ARITY and len(args) not in _ARITY[kind]:
        raise InvalidConfig(f"{kind} takes {_ARITY[kind][0]} argument(s), got {len(args)}", key="shape")
    data: dict
    if kind == "ball":
        data = {"kind": "ball", "r": args[0]}
    elif kind == "ellipsoid":
        data = {"kind": "ellipsoid", "axes": tuple(args)}
    elif kind == "cube":
        data = {"kind": "cube", "p": args[0], "scale": args[1]}
    elif kind == "perturbed":
        if not float(args[1]).is_integer():
            raise InvalidConfig(f"harmonic index must be an integer, got {args[1]}", key="shape")
        data = {"kind": "perturbed", "r": args[0], "m": int(args[1]), "amplitude": args[2]}
    else:
        raise InvalidConfig(f"unknown shape kind {kind!r}", key="shape")
    if center is not None:
        data["center"] = center
    try:
        return _shape_adapter.validate_python(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise InvalidConfig(f"{term}: {first['msg']}", key="shape") from None


def parse_shape(text: str, n: int | None = None) -> ShapeSpec:
    """Parse compact shape syntax; catalog names resolve when ``n`` is given."""
    text = text.strip()
    if n is not None and text in CATALOG.get(n, {}):
        text = CATALOG[n][text]
    if not text:
        raise InvalidConfig("empty shape", key="shape")
    terms = [t.strip() for t in text.split("+")]
    if any(not t for t in terms):
        raise InvalidConfig(f"malformed Minkowski sum {text!r}", key="shape")
    specs = [_parse_term(t) for t in terms]
    if len(specs) == 1:
        return specs[0]
    return SumSpec(parts=tuple(specs))


def render_shape(spec: ShapeSpec) -> str:
    """Inverse of parse_shape."""
    if isinstance(spec, SumSpec):
        return "+".join(render_shape(p) for p in spec.parts)
    if isinstance(spec, BallSpec):
        text = f"ball:{spec.r!r}"
    elif isinstance(spec, EllipsoidSpec):
        text = "ellipsoid:" + ",".join(repr(a) for a in spec.axes)
    elif isinstance(spec, CubeSpec):
        text = f"cube:{spec.p!r},{spec.scale!r}"
    else:
        text = f"perturbed:{spec.r!r},{spec.m},{spec.amplitude!r}"
    if spec.center is not None:
        text += "@" + ",".join(repr(c) for c in spec.center)
    return text


def _check_dim(values: tuple[float, ...], grid: SphereGrid, what: str) -> np.ndarray:
    if len(values) != grid.n + 1:
        raise InvalidConfig(f"{what} needs {grid.n + 1} components for n={grid.n}, got {len(values)}",
                            key="shape")
    return np.asarray(values, dtype=float)


def _support(spec: ShapeSpec, grid: SphereGrid) -> np.ndarray:
    z = grid.nodes
    if isinstance(spec, SumSpec):
        return sum((_support(p, grid) for p in spec.parts), np.zeros(grid.shape))

    if isinstance(spec, BallSpec):
        s = np.full(grid.shape, spec.r)
    elif isinstance(spec, EllipsoidSpec):
        axes = _check_dim(spec.axes, grid, "ellipsoid")
        s = np.sqrt(np.sum((axes * z) ** 2, axis=-1))
    elif isinstance(spec, CubeSpec):
        q = spec.p / (spec.p - 1.0)
        s = spec.scale * np.sum(np.abs(z) ** q, axis=-1) ** (1.0 / q)
    else:
        if grid.n == 1:
            harmonic = np.cos(spec.m * grid.theta)
        else:
            harmonic = eval_legendre(spec.m, z[..., 2])
        s = spec.r * (1.0 + spec.amplitude * harmonic)

    if spec.center is not None:
        s = s + z @ _check_dim(spec.center, grid, "center")
    return s


def make_shape(spec: ShapeSpec | str, grid: SphereGrid, *, validate: bool = True) -> np.ndarray:
    """Sample the support function of ``spec`` on ``grid``.

    Raises NonConvexInput when the sampled body is not strictly convex.
    """
    if isinstance(spec, str):
        spec = parse_shape(spec, grid.n)
    s = _support(spec, grid)
    if validate:
        r_min, r_max = validate_strict_convexity(s, grid, initial=True)
        logger.debug("Shape %s: principal radii in [%.4g, %.4g]", render_shape(spec), r_min, r_max)
    return s


def random_smooth_shape(rng: np.random.Generator, n: int = 1) -> ShapeSpec:
    """A random smooth strictly convex body: ball, ellipsoid, perturbed ball or a sum."""
    dim = n + 1
    center = tuple(float(c) for c in rng.uniform(-0.5, 0.5, dim))
    kind = rng.choice(["ball", "ellipsoid", "perturbed", "sum"])
    if kind == "ball":
        return BallSpec(r=float(rng.uniform(0.5, 2.0)), center=center)
    if kind == "perturbed":
        m = int(rng.integers(2, 5))
        # on the circle tau stays positive while amplitude * (m^2 - 1) < 1
        amplitude = float(rng.uniform(0.0, 0.5 / (n * (m * m - 1))))
        return PerturbedSpec(r=float(rng.uniform(0.5, 2.0)), m=m, amplitude=amplitude, center=center)
    ellipsoid = EllipsoidSpec(axes=tuple(float(a) for a in rng.uniform(1.0, 2.0, dim)), center=center)
    if kind == "ellipsoid":
        return ellipsoid
    return SumSpec(parts=(ellipsoid, BallSpec(r=float(rng.uniform(0.1, 1.0)))))


def catalog(n: int) -> dict[str, ShapeSpec]:
    if n not in CATALOG:
        raise InvalidConfig(f"no shape catalog for n={n}", key="n")
    return {name: parse_shape(text) for name, text in CATALOG[n].items()}
