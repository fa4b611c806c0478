"""Drive a frame stream through one profile switch with the controller in the loop."""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Iterable

from .controller import Controller
from .events import Alert, InstallRule, ParseFailed, addr_hex, dumps
from .header_schema import PacketMeta
from .pipeline import PacketVerdict, PipelineError, SwitchState, process_packet
from .profile import BROADCAST, DSTNODECOUNTER, ProfileConfig, build_switch, classify_hello
from .simnet import PacketRecord, ScenarioConfig, generate


class InvariantViolation(RuntimeError):
    pass


@dataclass
class RunReport:
    packets_in: int = 0
    forwarded: int = 0
    dropped: int = 0
    parse_failures: int = 0
    alerts: list[dict[str, Any]] = field(default_factory=list)
    rules_installed: list[dict[str, Any]] = field(default_factory=list)
    per_dst_counts: dict[str, int] = field(default_factory=dict)
    profile: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


@dataclass
class RunResult:
    report: RunReport
    log: list[str]
    switch: SwitchState
    controller: Controller

    @property
    def alert_sequence(self) -> list[tuple[int, int, int]]:
        return [(int(a["dst"], 16), a["window"], a["count"]) for a in self.report.alerts]


PacketHook = Callable[[PacketRecord, PacketVerdict], None]


def run_records(
    records: Iterable[PacketRecord],
    config: ProfileConfig | None = None,
    confirm_k: int = 1,
    delay_s: float = 0.0,
    on_packet: PacketHook | None = None,
    switch_id: str = "s1",
) -> RunResult:
    config = config or ProfileConfig()
    sw = build_switch(config, switch_id)
    ctl = Controller(confirm_k, delay_s)
    ctl.register(sw)
    report = RunReport(profile=config.to_json())
    log = [f"# run start switch={switch_id} theta={config.theta} window_s={config.window_s}"]
    pending: deque[tuple[float, InstallRule, float]] = deque()
    per_dst: Counter[int] = Counter()

    def apply_due(now: float | None) -> None:
        while pending and (now is None or pending[0][0] <= now):
            _, cmd, issued = pending.popleft()
            try:
                ctl.apply(cmd)
            except PipelineError as exc:
                log.append(f"# install {addr_hex(cmd.key)} failed: {exc}")
                continue
            applied = issued + delay_s
            report.rules_installed.append(
                {**cmd.to_message(), "issued_ts": round(issued, 6), "applied_ts": round(applied, 6)}
            )
            log.append(f"# applied install {addr_hex(cmd.key)} on {cmd.switch_id}")

    last_ts = 0.0
    for rec in records:
        ts = rec.timestamp_s
        if ts < last_ts:
            raise InvariantViolation(f"records out of time order at t={ts}")
        last_ts = ts
        apply_due(ts)
        verdict, _ = process_packet(sw, rec.raw_bytes, PacketMeta(0, ts, len(rec.raw_bytes)))
        report.packets_in += 1
        if verdict.forwarded:
            report.forwarded += 1
            pkt = verdict.parsed
            if pkt is not None and classify_hello(pkt, config):
                dst = pkt.headers[2].values["dst"]
                if dst != BROADCAST:
                    per_dst[dst] += 1
        else:
            report.dropped += 1
        for ev in verdict.events:
            if isinstance(ev, ParseFailed):
                report.parse_failures += 1
                log.append(dumps(ev.to_message()))
                continue
            if isinstance(ev, Alert):
                msg = ev.to_message()
                report.alerts.append(msg)
                log.append(dumps(msg))
            for cmd in ctl.handle_event(ev):
                log.append(dumps(cmd.to_message()))
                if isinstance(cmd, InstallRule):
                    pending.append((ev.timestamp_s + delay_s, cmd, ev.timestamp_s))
        if on_packet is not None:
            on_packet(rec, verdict)
    # commands still in flight when the stream ends
    apply_due(None)

    snap = ctl.poll_counters(switch_id, DSTNODECOUNTER)
    log.append(dumps({"type": "read_counters", "switch": switch_id, "counter": DSTNODECOUNTER}))
    log.append(f"# counters: {len(snap.entries)} cells")
    report.per_dst_counts = {addr_hex(k): v for k, v in sorted(per_dst.items())}

    if report.packets_in != report.forwarded + report.dropped:
        raise InvariantViolation("packets_in != forwarded + dropped")
    if report.packets_in != sw.stats.packets or report.forwarded != sw.stats.forwarded:
        raise InvariantViolation("runner and switch packet accounting disagree")
    log.append(
        f"# done packets_in={report.packets_in} forwarded={report.forwarded} "
        f"dropped={report.dropped} parse_failures={report.parse_failures} "
        f"alerts={len(report.alerts)} rules={len(report.rules_installed)}"
    )
    return RunResult(report, log, sw, ctl)


def run_scenario(
    scenario: ScenarioConfig, overrides: dict[str, Any] | None = None, **kw: Any
) -> tuple[RunResult, list[PacketRecord]]:
    if overrides:
        merged = {**scenario.profile, **{k: v for k, v in overrides.items() if v is not None}}
        scenario = replace(scenario, profile=merged)
    config = scenario.profile_config()
    records = generate(scenario)
    ctl = scenario.controller
    kw.setdefault("confirm_k", int(ctl.get("confirm_k", 1)))
    kw.setdefault("delay_s", float(ctl.get("delay_s", 0.0)))
    return run_records(records, config, **kw), records
