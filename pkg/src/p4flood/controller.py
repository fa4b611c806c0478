"""Simulated SDN controller.

Alerts arrive from switches over the southbound channel; once a destination
has alerted in ``confirm_k`` distinct windows it is flagged and a DROP entry
for it is pushed into the reporting switch's blocklist.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from .events import (
    Alert,
    Command,
    ControllerEvent,
    CounterSnapshot,
    InstallRule,
    ParseFailed,
    ReadCounters,
    TableDiagnostic,
    dumps,
)
from .pipeline import DROP, SwitchState, install_entry, read_counters
from .profile import BLOCKLIST, DSTNODECOUNTER

log = logging.getLogger(__name__)


class UnknownSwitch(KeyError):
    pass


class NodeState(enum.Enum):
    BENIGN = "benign"
    SUSPECT = "suspect"
    FLAGGED = "flagged"


@dataclass
class NodeStatus:
    addr: int
    state: NodeState = NodeState.BENIGN
    alert_windows: set[int] = field(default_factory=set)
    flagged_at: float | None = None


@dataclass(frozen=True)
class MitigationRule:
    switch_id: str
    key: int
    table: str = BLOCKLIST
    action: str = "drop"


class Controller:
    def __init__(self, confirm_k: int = 1, delay_s: float = 0.0):
        if confirm_k < 1:
            raise ValueError("confirm_k must be >= 1")
        if delay_s < 0:
            raise ValueError("delay_s must be >= 0")
        self.confirm_k = confirm_k
        self.delay_s = delay_s
        self.switches: dict[str, SwitchState] = {}
        self.nodes: dict[int, NodeStatus] = {}
        self.rules: dict[tuple[str, int], MitigationRule] = {}
        self.messages: list[str] = []  # southbound traffic, both directions, in order

    def register(self, sw: SwitchState) -> None:
        self.switches[sw.id] = sw

    def status(self, addr: int) -> NodeState:
        st = self.nodes.get(addr)
        return st.state if st else NodeState.BENIGN

    def handle_event(self, event: ControllerEvent) -> list[Command]:
        if isinstance(event, Alert):
            self.messages.append(dumps(event.to_message()))
            return self._on_alert(event)
        if isinstance(event, (ParseFailed, CounterSnapshot, TableDiagnostic)):
            log.debug("event from %s: %s", event.switch_id, event)
            return []
        log.warning("skipping malformed event %r", event)
        return []

    def _on_alert(self, alert: Alert) -> list[Command]:
        st = self.nodes.get(alert.dst_addr)
        if st is None:
            st = self.nodes[alert.dst_addr] = NodeStatus(alert.dst_addr)
        st.alert_windows.add(alert.window_index)
        if st.state is not NodeState.FLAGGED:
            if len(st.alert_windows) < self.confirm_k:
                st.state = NodeState.SUSPECT
                return []
            st.state = NodeState.FLAGGED
            st.flagged_at = alert.timestamp_s
        if (alert.switch_id, alert.dst_addr) in self.rules:
            return []
        rule = MitigationRule(alert.switch_id, alert.dst_addr)
        self.rules[(rule.switch_id, rule.key)] = rule
        cmd = InstallRule(rule.switch_id, rule.table, rule.key, rule.action)
        self.messages.append(dumps(cmd.to_message()))
        return [cmd]

    def apply(self, cmd: Command) -> CounterSnapshot | None:
        """Carry out ``cmd`` against the target switch."""
        sw = self._switch(cmd.switch_id)
        if isinstance(cmd, InstallRule):
            install_entry(sw, cmd.table, cmd.key, DROP)
            return None
        return CounterSnapshot(sw.id, cmd.counter, tuple(read_counters(sw, cmd.counter)))

    def poll_counters(self, switch_id: str, counter: str = DSTNODECOUNTER) -> CounterSnapshot:
        cmd = ReadCounters(switch_id, counter)
        self._switch(switch_id)
        self.messages.append(dumps(cmd.to_message()))
        snap = self.apply(cmd)
        assert snap is not None
        self.messages.append(dumps(snap.to_message()))
        return snap

    def _switch(self, switch_id: str) -> SwitchState:
        try:
            return self.switches[switch_id]
        except KeyError:
            raise UnknownSwitch(switch_id) from None
