from .interfaces import Closure, NullClosure, count_parameters

from .deep import CNNClosure, PeriodicConv2d, init_cnn, CHANNELS
from .physical import SmagorinskyClosure, strain_magnitude, eddy_diffusion
from .hybrid import QGModel
