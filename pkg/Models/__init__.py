from .checkpoint import *
from .heads import *
from .latent import *
from .layers import *
from .module import *
from .networks import *
