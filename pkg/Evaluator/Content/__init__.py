from .analysis import *
from .cli import *
from .commands import *
from .decorators import *
from .evaluation import *
from .images import *
from .report import *
