from .dataset import *
from .noise import *
from .pendulum import *
from .render import *
