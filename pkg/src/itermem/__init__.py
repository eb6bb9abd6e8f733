"""Iterated integrals of differential forms over paths and membranes."""
from .chen import (MatrixConnection, TensorSeries, check_composition, check_decorated_shuffle,
                   check_shuffle, holonomy_curvature_check, iterated_path_integral,
                   series_multiply, transport_series, transport_step)
from .expr import Expression, differentiate, evaluate, parse
from .forms import DifferentialForm, evaluate_form, exterior_derivative, express_in_basis, wedge
from .geometry import (MembraneFamily, Path, PiecewiseMembrane, SampledMembrane, SymbolicMembrane,
                       concat_paths, glue_membranes, pullback)
from .membranes import (LabeledIntegrand, Slot, check_glued_product, check_membrane_shuffle,
                        extract_component, higher_transport, integrate_membrane, shuffle_combine,
                        validate)
from .quadrature import QuadratureConfig, integrate_ordered
from .shuffles import (enumerate_product, enumerate_sh, enumerate_sh1, enumerate_sh_bar,
                       enumerate_shn)

__version__ = "0.1.0"
