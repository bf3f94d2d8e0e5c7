from .expr import Expression, parse_expr  # noqa: F401
from .hp_model import HyperbolicParabolicModel  # noqa: F401
from .loader import load_builtin, load_model, serialize_model  # noqa: F401
from .registry import BUILTINS, registry  # noqa: F401
