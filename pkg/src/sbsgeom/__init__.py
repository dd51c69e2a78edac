"""Special Bohr-Sommerfeld geometry of CP^1 minus the zeros of a section of O(d).

Critical points and gradient-flow skeleton of the potential
``psi = -ln |alpha|_h``, exact loops and their Bohr-Sommerfeld data, and
monodromy of the exact-loop covering over the space of sections.
"""

from .config import AreaScaleMode, RunConfig
from .errors import (
    AmbiguousWinding,
    ContinuationBroken,
    DegenerateCritical,
    DivisorPole,
    IllConditioned,
    InvalidPath,
    NearDiscriminant,
    NoExactRadius,
    NoSignChange,
    ResolutionTooCoarse,
    SbsError,
    SelfIntersecting,
    SkeletonIncomplete,
)
from .loops import (
    LoopCurve,
    LoopReport,
    action_integral,
    cap_loop,
    check_proposition,
    construct_exact_loop,
    enclosed_area,
    holonomy,
    loop_inner_product,
    winding_numbers,
)
from .moduli import (
    CoefficientPath,
    ModuliFiber,
    MonodromyResult,
    continue_fiber,
    enumerate_fiber,
    locate_discriminant,
    monodromy,
    root_monodromy,
)
from .morse import (
    CriticalPoint,
    CriticalSetIncomplete,
    Direction,
    FlowControls,
    Skeleton,
    Terminus,
    Trajectory,
    extract_skeleton,
    find_critical_points,
    gradient_field,
    integrate_flow,
)
from .sections import (
    BinaryForm,
    Divisor,
    OneFormSample,
    discriminant_distance,
    divisor_roots,
    kahler_potential,
    liouville_form,
    rho_form,
    section_norm,
)
from .sphere import Chart, SpherePoint, TangentVector, chordal_distance, fs_area_density

__version__ = "0.1.0"

__all__ = [
    "action_integral",
    "AmbiguousWinding",
    "AreaScaleMode",
    "BinaryForm",
    "cap_loop",
    "Chart",
    "check_proposition",
    "chordal_distance",
    "CoefficientPath",
    "construct_exact_loop",
    "ContinuationBroken",
    "continue_fiber",
    "CriticalPoint",
    "CriticalSetIncomplete",
    "DegenerateCritical",
    "Direction",
    "discriminant_distance",
    "Divisor",
    "divisor_roots",
    "DivisorPole",
    "enclosed_area",
    "enumerate_fiber",
    "extract_skeleton",
    "find_critical_points",
    "FlowControls",
    "fs_area_density",
    "gradient_field",
    "holonomy",
    "IllConditioned",
    "integrate_flow",
    "InvalidPath",
    "kahler_potential",
    "liouville_form",
    "locate_discriminant",
    "loop_inner_product",
    "LoopCurve",
    "LoopReport",
    "ModuliFiber",
    "monodromy",
    "MonodromyResult",
    "NearDiscriminant",
    "NoExactRadius",
    "NoSignChange",
    "OneFormSample",
    "ResolutionTooCoarse",
    "rho_form",
    "root_monodromy",
    "RunConfig",
    "SbsError",
    "section_norm",
    "SelfIntersecting",
    "Skeleton",
    "SkeletonIncomplete",
    "SpherePoint",
    "TangentVector",
    "Terminus",
    "Trajectory",
    "winding_numbers",
]
