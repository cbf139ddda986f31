from .losses import *
from .optimizer import *
from .rows import *
from .trainer import *
