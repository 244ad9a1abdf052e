from .app import create_app, load_app, serve
from .schemas import ClassifyRequest, ClassifyResponse

__all__ = ["ClassifyRequest", "ClassifyResponse", "create_app", "load_app", "serve"]
