from .distributions import *
from .exact import *
from .grid import *
from .hyperparams import *
from .kernel import *
from .variational import *
