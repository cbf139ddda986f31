from .functional import *
from .gradcheck import *
from .linalg import *
from .ops import *
from .parameters import *
from .tape import *
from .tensor import *
