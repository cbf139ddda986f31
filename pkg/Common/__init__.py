from .bases import *
from .columns import *
from .config import *
from .errors import *
from .format import *
from .tables import *
from .utils import *
