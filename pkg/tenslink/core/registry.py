from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from .errors import ValidationError


logger = logging.getLogger(__name__)


@dataclass
class Method:
    """A named solver entry point the CLI can dispatch to."""

    name: str
    description: str
    fn: Callable[..., Any]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def run(self, **kwargs: Any) -> Any:
        return self.fn(**kwargs)

    def safe_call(self, **kwargs: Any) -> Dict[str, Any]:
        started = time.perf_counter()
        try:
            output = self.run(**kwargs)
            ok = True
        except Exception as e:  # noqa: BLE001
            logger.warning("method %s failed: %s", self.name, e)
            output = {"error": str(e), "error_type": type(e).__name__}
            ok = False
        latency_ms = int((time.perf_counter() - started) * 1000)
        return {"success": ok, "latency_ms": latency_ms, "output": output}


class MethodRegistry:
    def __init__(self, kind: str) -> None:
        self.kind = kind
        self._methods: Dict[str, Method] = {}

    def register(self, method: Method) -> Method:
        if method.name in self._methods:
            raise ValidationError(f"{self.kind} method {method.name!r} is already registered")
        self._methods[method.name] = method
        logger.debug("Registered %s method: %s", self.kind, method.name)
        return method

    def add(self, name: str, description: str, **metadata: Any) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
        """Decorator form of ``register``."""

        def wrap(fn: Callable[..., Any]) -> Callable[..., Any]:
            self.register(Method(name=name, description=description, fn=fn, metadata=dict(metadata)))
            return fn

        return wrap

    def get(self, name: Optional[str]) -> Method:
        if name is None or name not in self._methods:
            raise ValidationError(f"unknown {self.kind} method {name!r}; choose from {', '.join(self.names())}")
        return self._methods[name]

    def has(self, name: str) -> bool:
        return name in self._methods

    def names(self) -> List[str]:
        return sorted(self._methods)

    def catalog(self) -> str:
        return "\n".join(f"- {m.name}: {m.description}" for m in (self._methods[n] for n in self.names()))
