"""Construction utilities."""

from dataclasses import dataclass
from typing import Type

from src.models import CountSketch, GaussianSketch, HadamardBlock, OSNAP, SketchConstruction
from src.utils.general import check_seed, DEFAULT_SEED
from src.utils.sparsemat import DenseMatrix, SketchMatrix

KINDS = ("countsketch", "osnap", "gaussian", "hadamard_block")


def get_construction(
    kind: str,
) -> Type[CountSketch | OSNAP | GaussianSketch | HadamardBlock]:
    """Return sketch construction based on name."""
    match kind:
        case "countsketch":
            return CountSketch
        case "osnap":
            return OSNAP
        case "gaussian":
            return GaussianSketch
        case "hadamard_block":
            return HadamardBlock
        case _:
            raise ValueError(f"Sketch construction {kind} not available.")


def make_construction(
    kind: str,
    m: int,
    n: int,
    s: int = 1,
    eps: float | None = None,
) -> SketchConstruction:
    """Instantiate a construction, passing only the parameters it uses."""
    Construction = get_construction(kind)
    match kind:
        case "osnap":
            return Construction(m, n, s)
        case "hadamard_block":
            if eps is None:
                raise ValueError("The Hadamard-block construction requires eps.")
            return Construction(m, n, eps)
        case _:
            return Construction(m, n)


@dataclass(frozen=True)
class ConstructionSpec:
    """Full description of one sketch draw.

    Attributes:
        kind: one of `countsketch`, `osnap`, `gaussian`, `hadamard_block`.
        m: number of rows.
        n: number of columns.
        s: column sparsity (OSNAP only).
        eps: distortion level (Hadamard block only).
        seed: master seed.
    """

    kind: str
    m: int
    n: int
    s: int = 1
    eps: float | None = None
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        check_seed(self.seed)
        self.construction()

    def construction(self) -> SketchConstruction:
        return make_construction(self.kind, self.m, self.n, self.s, self.eps)


def build_construction(spec: ConstructionSpec) -> SketchMatrix | DenseMatrix:
    """Generate the matrix described by `spec`."""
    return spec.construction().generate(spec.seed)
