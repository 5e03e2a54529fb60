"""
Node and Flow primitives for the command pipelines.

A node runs in three phases: ``prep`` pulls its inputs out of the shared
dict, ``exec`` does the work, ``post`` stores results and names the next
action. Nodes chain with ``a >> b`` (default action) or ``a - "action" >> b``.
"""

import logging
import time
from abc import ABC, abstractmethod
from typing import Any, Generic, TypeVar

from utils.metrics import gauge, histogram, increment

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_ACTION = "default"


class Node(Generic[T, R], ABC):
    """Base class for one step of a flow."""

    def __init__(self, node_id: str | None = None):
        self.node_id = node_id or self.__class__.__name__
        self._successors: dict[str, Node[Any, Any]] = {}

    @abstractmethod
    def prep(self, shared: dict[str, Any]) -> T:
        """Extract and check this node's inputs from the shared context."""

    @abstractmethod
    def exec(self, prep_result: T) -> R:
        """Do the work; must not touch the shared context."""

    def post(self, shared: dict[str, Any], prep_result: T, exec_result: R) -> str | None:
        """
        Store results and choose the next action.

        The default stores ``exec_result`` under ``<node_id>_result`` and
        follows the default action.
        """
        shared[f"{self.node_id}_result"] = exec_result
        return DEFAULT_ACTION

    def __rshift__(self, other: "Node[Any, Any]") -> "Node[Any, Any]":
        self._successors[DEFAULT_ACTION] = other
        return other

    def __sub__(self, action: str) -> "NodeBranch":
        return NodeBranch(self, action)

    def add_successor(self, action: str, node: "Node[Any, Any]") -> None:
        if action in self._successors:
            logger.warning(f"Overwriting successor for action '{action}' on {self.node_id}")
        self._successors[action] = node

    def next_node(self, action: str | None) -> "Node[Any, Any] | None":
        if action is None:
            return None
        return self._successors.get(action)

    def _record_execution(self, duration: float, success: bool) -> None:
        increment(
            "node_executions_total",
            tags={"node_id": self.node_id, "status": "success" if success else "error"},
        )
        histogram("node_execution_duration", duration, tags={"node_id": self.node_id})
        gauge("node_last_execution_duration", duration, tags={"node_id": self.node_id})

    def process(self, shared: dict[str, Any]) -> str | None:
        """Run prep, exec and post; returns the chosen action."""
        start_time = time.perf_counter()
        logger.debug(
            f"Starting node: {self.node_id}",
            extra={"action": "node_start", "node_id": self.node_id, "shared_keys": list(shared)},
        )

        try:
            prep_result = self.prep(shared)
            exec_result = self.exec(prep_result)
            action = self.post(shared, prep_result, exec_result)
        except Exception as e:
            duration = time.perf_counter() - start_time
            self._record_execution(duration, success=False)
            logger.error(
                f"Node {self.node_id} failed: {e}",
                extra={
                    "action": "node_failed",
                    "node_id": self.node_id,
                    "error": str(e),
                    "error_type": type(e).__name__,
                    "duration": duration,
                },
            )
            shared["error"] = {
                "node_id": self.node_id,
                "error": str(e),
                "error_type": type(e).__name__,
            }
            raise

        duration = time.perf_counter() - start_time
        self._record_execution(duration, success=True)
        logger.debug(
            f"Completed node: {self.node_id} in {duration:.3f}s",
            extra={
                "action": "node_complete",
                "node_id": self.node_id,
                "duration": duration,
                "next_action": action,
            },
        )
        return action


class NodeBranch:
    """Pending ``node - "action"`` awaiting its ``>> target``."""

    def __init__(self, source: Node[Any, Any], action: str):
        self.source = source
        self.action = action

    def __rshift__(self, target: Node[Any, Any]) -> Node[Any, Any]:
        self.source.add_successor(self.action, target)
        return target


class Flow:
    """Walks a chain of nodes over one shared dict."""

    def __init__(self, start_node: Node[Any, Any], flow_id: str | None = None):
        self.start_node = start_node
        self.flow_id = flow_id or start_node.node_id

    def run(self, shared: dict[str, Any]) -> dict[str, Any]:
        """
        Execute nodes from the start node until one returns no successor.

        Node exceptions propagate after the failing node has recorded its
        error in ``shared["error"]``.
        """
        node: Node[Any, Any] | None = self.start_node
        execution_path: list[str] = []

        logger.info(
            f"Starting flow {self.flow_id}",
            extra={"action": "flow_start", "flow_id": self.flow_id},
        )

        while node is not None:
            execution_path.append(node.node_id)
            try:
                action = node.process(shared)
            except Exception as e:
                logger.error(
                    f"Flow {self.flow_id} failed at node {node.node_id}: {e}",
                    extra={
                        "action": "flow_failed",
                        "flow_id": self.flow_id,
                        "failed_node": node.node_id,
                        "execution_path": execution_path,
                    },
                )
                raise
            node = node.next_node(action)

        shared["execution_path"] = execution_path
        logger.info(
            f"Completed flow {self.flow_id}. Path: {' -> '.join(execution_path)}",
            extra={
                "action": "flow_complete",
                "flow_id": self.flow_id,
                "execution_path": execution_path,
            },
        )
        return shared
