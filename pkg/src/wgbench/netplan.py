"""Micro-segmented home network plan: subnet hierarchy, firewall policy,
IPv6 ULA derivation and tunnel address scoping."""

from __future__ import annotations

import ipaddress
import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Union

INTERNET = "Internet"
ROUTER = "Router"

PROTOCOLS = ("any", "DHCP", "NTP", "TFTP", "HTTP", "HTTPS", "tunnel-UDP")


class Category(str, Enum):
    MAIN_FIXED = "main-fixed"
    MAIN_MOBILE = "main-mobile"
    MAIN_GAMING = "main-gaming"
    SERVICES = "services"
    IOT_RESTRICTED = "iot-restricted"
    IOT_OUTGOING = "iot-outgoing"
    MEDIA = "media"
    GUEST = "guest"
    PARENT = "parent"


class VpnConfigMode(str, Enum):
    """The four VPN deployment configurations surveyed for mobile access.

    The benchmark only exercises ON_DEMAND: the tunnel is brought up when
    the home subnets are addressed and other traffic bypasses it.
    """

    STANDARD = "standard"
    ON_DEMAND = "on-demand"
    PER_APP = "per-app"
    ALWAYS_ON = "always-on"


@dataclass(frozen=True)
class SubnetSpec:
    name: str
    base: ipaddress.IPv4Address
    prefix: int
    note: str = ""
    category: Category = Category.PARENT
    parent: Optional[str] = None

    def __post_init__(self):
        net = self.network  # raises if base has host bits set
        if net.prefixlen != self.prefix:
            raise ValueError(f"{self.name}: bad prefix {self.prefix}")

    @property
    def network(self) -> ipaddress.IPv4Network:
        return ipaddress.IPv4Network((self.base, self.prefix), strict=True)

    @property
    def hex_base(self) -> str:
        return ".".join(f"{b:02X}" for b in self.base.packed)


class Verdict(str, Enum):
    ALLOW = "allow"
    DENY = "deny"


@dataclass(frozen=True)
class PolicyRule:
    rule_id: int
    src: str  # subnet name, "Internet" or "*"
    dst: str  # subnet name, "Internet", "Router" or "*"
    direction: str  # "inbound" | "outbound"
    protocol: str  # one of PROTOCOLS
    state: str  # "new" | "established" | "*"
    verdict: Verdict

    def render(self) -> str:
        return (
            f"{self.rule_id:4d} {self.verdict.value:5s} {self.direction:8s} "
            f"{self.src} -> {self.dst} proto={self.protocol} state={self.state}"
        )

    @classmethod
    def parse(cls, line: str) -> "PolicyRule":
        head, tail = line.split(" proto=")
        proto, state = tail.split(" state=")
        fields = head.split()
        rule_id, verdict, direction = int(fields[0]), fields[1], fields[2]
        src = " ".join(fields[3:fields.index("->")])
        dst = " ".join(fields[fields.index("->") + 1:])
        return cls(rule_id, src, dst, direction, proto, state.strip(), Verdict(verdict))


@dataclass(frozen=True)
class FlowDecision:
    verdict: Verdict
    matched_rule: int


@dataclass(frozen=True)
class SubnetPlan:
    root: SubnetSpec
    children: tuple[SubnetSpec, ...]
    policy: tuple[PolicyRule, ...]

    def __post_init__(self):
        ids = [r.rule_id for r in self.policy]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate rule ids")
        by_name = {s.name: s for s in self.all_subnets()}
        for spec in self.children:
            if spec.parent is None or spec.parent not in by_name:
                raise ValueError(f"{spec.name}: unknown parent {spec.parent!r}")
            if not spec.network.subnet_of(by_name[spec.parent].network):
                raise ValueError(f"{spec.name} not contained in {spec.parent}")
        leaves = self.leaves()
        for i, a in enumerate(leaves):
            for b in leaves[i + 1:]:
                if a.network.overlaps(b.network):
                    raise ValueError(f"overlapping leaves {a.name}/{b.name}")

    def all_subnets(self) -> list[SubnetSpec]:
        return [self.root, *self.children]

    def parents(self) -> list[SubnetSpec]:
        child_parents = {s.parent for s in self.children}
        return [s for s in self.all_subnets() if s.name in child_parents or s is self.root]

    def leaves(self) -> list[SubnetSpec]:
        parent_names = {s.name for s in self.parents()}
        return [s for s in self.children if s.name not in parent_names]

    def subnet(self, name: str) -> SubnetSpec:
        for s in self.all_subnets():
            if s.name == name:
                return s
        raise KeyError(name)

    def to_json(self) -> str:
        rows = [
            {
                "name": s.name,
                "ipv4": str(s.base),
                "hex": s.hex_base,
                "prefix": s.prefix,
                "note": s.note,
                "category": s.category.value,
                "parent": s.parent,
            }
            for s in self.all_subnets()
        ]
        return json.dumps({"subnets": rows, "firewall": [r.render() for r in self.policy]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SubnetPlan":
        doc = json.loads(text)
        specs = [
            SubnetSpec(
                name=row["name"],
                base=ipaddress.IPv4Address(row["ipv4"]),
                prefix=row["prefix"],
                note=row.get("note", ""),
                category=Category(row.get("category", "parent")),
                parent=row.get("parent"),
            )
            for row in doc["subnets"]
        ]
        rules = tuple(PolicyRule.parse(line) for line in doc.get("firewall", []))
        return cls(root=specs[0], children=tuple(specs[1:]), policy=rules)


def _default_subnets() -> tuple[SubnetSpec, tuple[SubnetSpec, ...]]:
    a = ipaddress.IPv4Address
    root = SubnetSpec("Home", a("192.168.0.0"), 16)
    children = (
        SubnetSpec("Main", a("192.168.0.0"), 20, parent="Home"),
        SubnetSpec("Fixed", a("192.168.0.0"), 24, "e.g. Computers",
                   Category.MAIN_FIXED, "Main"),
        SubnetSpec("Mobile", a("192.168.1.0"), 24, "e.g. Smart phones/tablets",
                   Category.MAIN_MOBILE, "Main"),
        SubnetSpec("Gaming", a("192.168.2.0"), 24, "e.g. Gaming and other consoles",
                   Category.MAIN_GAMING, "Main"),
        SubnetSpec("Services", a("192.168.16.0"), 20,
                   "Network attached services (e.g. NAS/Printer/...)",
                   Category.SERVICES, "Home"),
        SubnetSpec("IoT", a("192.168.32.0"), 20,
                   "All IoT (no device-2-device comms by default)",
                   Category.PARENT, "Home"),
        SubnetSpec("restricted", a("192.168.32.0"), 24,
                   "No incoming/outgoing (except limited DHCP, NTP, TFTP,...)",
                   Category.IOT_RESTRICTED, "IoT"),
        SubnetSpec("Outgoing", a("192.168.33.0"), 24,
                   "Enables outgoing connection, and related incoming.",
                   Category.IOT_OUTGOING, "IoT"),
        SubnetSpec("Media", a("192.168.48.0"), 20, "E.g. smart TVs, home theaters",
                   Category.MEDIA, "Home"),
        SubnetSpec("Guest", a("192.168.64.0"), 20,
                   "Internet only, no access to other parts of the network. (e.g. guests' phone)",
                   Category.GUEST, "Home"),
    )
    return root, children


def default_policy() -> tuple[PolicyRule, ...]:
    """First-match rule table realizing the per-subnet notes of the plan."""
    R = PolicyRule
    V = Verdict
    rules = [
        # Tunnel endpoint on the router accepts encapsulated traffic.
        R(10, INTERNET, ROUTER, "inbound", "tunnel-UDP", "*", V.ALLOW),
        # Guest: Internet only.
        R(20, "Guest", INTERNET, "outbound", "any", "*", V.ALLOW),
        R(21, "Guest", "*", "*", "any", "*", V.DENY),
        R(22, "*", "Guest", "inbound", "any", "new", V.DENY),
        # Restricted IoT: limited bootstrap/time egress, nothing else.
        R(30, "restricted", INTERNET, "outbound", "DHCP", "*", V.ALLOW),
        R(31, "restricted", INTERNET, "outbound", "NTP", "*", V.ALLOW),
        R(32, "restricted", INTERNET, "outbound", "TFTP", "*", V.ALLOW),
        R(33, "restricted", "*", "outbound", "any", "*", V.DENY),
        R(34, "*", "restricted", "inbound", "any", "new", V.DENY),
        # No IoT device-to-device by default.
        R(39, "restricted", "Outgoing", "*", "any", "*", V.DENY),
        R(40, "Outgoing", "restricted", "*", "any", "*", V.DENY),
        # Outgoing IoT: initiates freely, related inbound only.
        R(41, "Outgoing", "*", "outbound", "any", "*", V.ALLOW),
        R(42, "*", "Outgoing", "inbound", "any", "established", V.ALLOW),
        R(43, "*", "Outgoing", "inbound", "any", "*", V.DENY),
        # Main reaches local services/media, not the reverse.
        R(60, "Main", "Services", "outbound", "any", "*", V.ALLOW),
        R(61, "Main", "Media", "outbound", "any", "*", V.ALLOW),
        R(62, "Services", "Main", "outbound", "any", "new", V.DENY),
        R(63, "Media", "Main", "outbound", "any", "new", V.DENY),
        # Default outbound Internet for the trusted groups.
        R(70, "Main", INTERNET, "outbound", "any", "*", V.ALLOW),
        R(71, "Services", INTERNET, "outbound", "any", "*", V.ALLOW),
        R(72, "Media", INTERNET, "outbound", "any", "*", V.ALLOW),
        # Catch-all.
        R(999, "*", "*", "*", "any", "*", V.DENY),
    ]
    return tuple(rules)


def default_plan() -> SubnetPlan:
    root, children = _default_subnets()
    return SubnetPlan(root=root, children=children, policy=default_policy())


def classify(plan: SubnetPlan, addr: Union[str, ipaddress.IPv4Address]) -> Union[list[str], str]:
    """Root-to-leaf name path of the longest-prefix subnet containing addr."""
    ip = ipaddress.IPv4Address(addr)
    if ip not in plan.root.network:
        return "unassigned"
    by_name = {s.name: s for s in plan.all_subnets()}
    best = plan.root
    for spec in plan.children:
        if ip in spec.network and spec.prefix > best.prefix:
            best = spec
    path = [best.name]
    while best.parent is not None:
        best = by_name[best.parent]
        path.append(best.name)
    return list(reversed(path))


def _endpoint_names(plan: SubnetPlan, endpoint: Union[str, ipaddress.IPv4Address]) -> set[str]:
    if isinstance(endpoint, str) and endpoint in (INTERNET, ROUTER):
        return {endpoint}
    path = classify(plan, endpoint)
    if path == "unassigned":
        return {INTERNET}
    return set(path)


def evaluate_policy(
    plan: SubnetPlan,
    src: Union[str, ipaddress.IPv4Address],
    dst: Union[str, ipaddress.IPv4Address],
    protocol: str,
    direction: str,
    state: str = "new",
) -> FlowDecision:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    if direction not in ("inbound", "outbound"):
        raise ValueError(f"unknown direction {direction!r}")
    src_names = _endpoint_names(plan, src)
    dst_names = _endpoint_names(plan, dst)
    for rule in plan.policy:
        if rule.src != "*" and rule.src not in src_names:
            continue
        if rule.dst != "*" and rule.dst not in dst_names:
            continue
        if rule.direction != "*" and rule.direction != direction:
            continue
        if rule.protocol != "any" and rule.protocol != protocol:
            continue
        if rule.state != "*" and rule.state != state:
            continue
        return FlowDecision(rule.verdict, rule.rule_id)
    raise RuntimeError("policy has no catch-all rule")


def derive_ipv6_plan(plan: SubnetPlan, global_id: int) -> dict[str, ipaddress.IPv6Network]:
    """Map the IPv4 hierarchy into a ULA /48 keyed by a 40-bit global id.

    Each /24 becomes a /64 whose subnet id is the third octet of its IPv4
    base; shorter IPv4 prefixes become correspondingly shorter IPv6 prefixes
    so parents stay distinct from their first child.
    """
    if not 0 <= global_id < 2 ** 40:
        raise ValueError("global id must fit in 40 bits")
    site = (0xFD << 40 | global_id) << 80  # fd00::/8 + 40-bit global id -> /48
    mapping: dict[str, ipaddress.IPv6Network] = {}
    for spec in plan.all_subnets():
        subnet_id = spec.base.packed[2]
        v6_prefix = 64 - max(0, 24 - spec.prefix)
        net = ipaddress.IPv6Network((site | (subnet_id << 64), v6_prefix), strict=True)
        mapping[spec.name] = net
    if len(set(mapping.values())) != len(mapping):
        raise ValueError("IPv6 derivation is not injective for this plan")
    return mapping


def render_firewall(plan: SubnetPlan) -> str:
    return "\n".join(r.render() for r in sorted(plan.policy, key=lambda r: r.rule_id)) + "\n"


def parse_firewall(text: str) -> tuple[PolicyRule, ...]:
    return tuple(PolicyRule.parse(line) for line in text.splitlines() if line.strip())


def tunnel_scope(plan: SubnetPlan) -> set[ipaddress.IPv4Network]:
    """CIDR blocks the remote tunnel peer is allowed to reach."""
    iot_parents = {
        s.parent for s in plan.children
        if s.category in (Category.IOT_RESTRICTED, Category.IOT_OUTGOING)
    }
    scope = {plan.subnet(name).network for name in iot_parents if name is not None}
    if not scope:
        warnings.warn("plan has no IoT subnets; tunnel scope is empty")
    return scope
