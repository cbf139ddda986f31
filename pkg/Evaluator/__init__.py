from .Content import *
