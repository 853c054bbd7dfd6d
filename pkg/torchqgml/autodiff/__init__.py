from .functions import ADJOINTS
from .tape import Tape, TapeNode, GradientMap, record, backward, active_tape
from .gradcheck import grad_check, grad_check_parameters, adjoint_mismatch, \
    inner
from . import ops
