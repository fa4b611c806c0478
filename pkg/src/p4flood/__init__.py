"""Software P4-style dataplane with HELLO-flood detection for 6LoWPAN sensor networks."""

from .header_schema import (
    FieldDef,
    HeaderDef,
    HeaderInstance,
    PacketMeta,
    ParsedPacket,
    define_header,
    get_field,
    set_field,
    total_width_bits,
)
from .parser import ACCEPT, REJECT, ParseError, ParseGraph, ParseState, Select, deparse, parse, validate_graph
from .pipeline import (
    ActionSpec,
    KeyedCounter,
    PacketVerdict,
    SwitchState,
    Table,
    apply_table,
    counter_increment,
    install_entry,
    process_packet,
    read_counters,
)
from .profile import ProfileConfig, build_profile, build_switch, classify_hello, detect
from .controller import Controller
from .simnet import ScenarioConfig, generate, prng_next
from .pcap import read_pcap, write_pcap
from .runner import RunReport, run_records, run_scenario

__version__ = "0.1.0"
