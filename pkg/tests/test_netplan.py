import ipaddress

import pytest
from hypothesis import given, strategies as st

from wgbench import netplan
from wgbench.netplan import Category, Verdict, default_plan


FIG4_ROWS = [
    # name, ipv4, hex, prefix
    ("Home", "192.168.0.0", "C0.A8.00.00", 16),
    ("Main", "192.168.0.0", "C0.A8.00.00", 20),
    ("Fixed", "192.168.0.0", "C0.A8.00.00", 24),
    ("Mobile", "192.168.1.0", "C0.A8.01.00", 24),
    ("Gaming", "192.168.2.0", "C0.A8.02.00", 24),
    ("Services", "192.168.16.0", "C0.A8.10.00", 20),
    ("IoT", "192.168.32.0", "C0.A8.20.00", 20),
    ("restricted", "192.168.32.0", "C0.A8.20.00", 24),
    ("Outgoing", "192.168.33.0", "C0.A8.21.00", 24),
    ("Media", "192.168.48.0", "C0.A8.30.00", 20),
    ("Guest", "192.168.64.0", "C0.A8.40.00", 20),
]


@pytest.fixture(scope="module")
def plan():
    return default_plan()


class TestDefaultPlan:
    def test_all_rows(self, plan):
        for name, ipv4, hex_base, prefix in FIG4_ROWS:
            spec = plan.subnet(name)
            assert str(spec.base) == ipv4
            assert spec.hex_base == hex_base
            assert spec.prefix == prefix

    def test_leaf_and_parent_counts(self, plan):
        assert len(plan.leaves()) == 8
        assert {s.name for s in plan.parents()} == {"Home", "Main", "IoT"}

    def test_bases_are_network_addresses(self, plan):
        for spec in plan.all_subnets():
            assert spec.network.network_address == spec.base

    def test_iot_parent_present(self, plan):
        iot = plan.subnet("IoT")
        assert str(iot.network) == "192.168.32.0/20"
        assert iot.hex_base == "C0.A8.20.00"

    def test_json_round_trip(self, plan):
        again = netplan.SubnetPlan.from_json(plan.to_json())
        assert again == plan


class TestClassify:
    @pytest.mark.parametrize("addr,path", [
        ("192.168.33.7", ["Home", "IoT", "Outgoing"]),
        ("192.168.2.40", ["Home", "Main", "Gaming"]),
        ("192.168.34.9", ["Home", "IoT"]),  # gap inside the /20, parent only
        ("192.168.80.1", ["Home"]),  # unallocated /20 range
    ])
    def test_paths(self, plan, addr, path):
        assert netplan.classify(plan, addr) == path

    def test_outside_home(self, plan):
        assert netplan.classify(plan, "10.0.0.1") == "unassigned"

    @given(st.integers(0, 2 ** 16 - 1))
    def test_at_most_one_leaf(self, offset):
        plan = default_plan()
        addr = ipaddress.IPv4Address(int(ipaddress.IPv4Address("192.168.0.0")) + offset)
        path = netplan.classify(plan, addr)
        assert path != "unassigned"
        leaf_names = {s.name for s in plan.leaves()}
        assert len(leaf_names.intersection(path)) <= 1


class TestPolicy:
    def test_guest_to_nas_denied(self, plan):
        d = netplan.evaluate_policy(plan, "192.168.64.9", "192.168.16.5",
                                    "HTTP", "outbound", "new")
        assert d.verdict == Verdict.DENY

    def test_restricted_ntp_allowed(self, plan):
        d = netplan.evaluate_policy(plan, "192.168.32.9", netplan.INTERNET,
                                    "NTP", "outbound", "new")
        assert d.verdict == Verdict.ALLOW

    def test_restricted_https_denied(self, plan):
        d = netplan.evaluate_policy(plan, "192.168.32.9", netplan.INTERNET,
                                    "HTTPS", "outbound", "new")
        assert d.verdict == Verdict.DENY

    def test_outgoing_related_inbound(self, plan):
        d = netplan.evaluate_policy(plan, netplan.INTERNET, "192.168.33.4",
                                    "HTTPS", "inbound", "established")
        assert d.verdict == Verdict.ALLOW
        d = netplan.evaluate_policy(plan, netplan.INTERNET, "192.168.33.4",
                                    "HTTPS", "inbound", "new")
        assert d.verdict == Verdict.DENY

    def test_tunnel_udp_to_router(self, plan):
        d = netplan.evaluate_policy(plan, netplan.INTERNET, netplan.ROUTER,
                                    "tunnel-UDP", "inbound", "new")
        assert d.verdict == Verdict.ALLOW

    def test_iot_leaf_to_leaf_denied(self, plan):
        for direction in ("outbound", "inbound"):
            for state in ("new", "established"):
                d = netplan.evaluate_policy(plan, "192.168.32.5", "192.168.33.5",
                                            "HTTP", direction, state)
                assert d.verdict == Verdict.DENY

    def test_unknown_protocol(self, plan):
        with pytest.raises(ValueError):
            netplan.evaluate_policy(plan, "192.168.0.1", netplan.INTERNET,
                                    "SMTP", "outbound", "new")

    def test_matched_rule_exists(self, plan):
        d = netplan.evaluate_policy(plan, "192.168.0.1", netplan.INTERNET,
                                    "HTTP", "outbound", "new")
        assert d.matched_rule in {r.rule_id for r in plan.policy}

    @given(
        st.sampled_from(["Fixed", "Mobile", "Gaming", "Services", "restricted",
                         "Outgoing", "Media"]),
        st.sampled_from(list(netplan.PROTOCOLS)),
        st.sampled_from(["new", "established"]),
    )
    def test_guest_never_reaches_home(self, dst_name, protocol, state):
        plan = default_plan()
        guest = "192.168.64.20"
        dst = str(plan.subnet(dst_name).base + 5)
        d = netplan.evaluate_policy(plan, guest, dst, protocol, "outbound", state)
        assert d.verdict == Verdict.DENY

    @given(st.sampled_from([p for p in netplan.PROTOCOLS
                            if p not in ("DHCP", "NTP", "TFTP")]))
    def test_restricted_egress_limited(self, protocol):
        plan = default_plan()
        d = netplan.evaluate_policy(plan, "192.168.32.9", netplan.INTERNET,
                                    protocol, "outbound", "new")
        assert d.verdict == Verdict.DENY


class TestIpv6:
    def test_documented_mapping(self, plan):
        m = netplan.derive_ipv6_plan(plan, 0x0123456789)
        assert str(m["Outgoing"]) == "fd01:2345:6789:21::/64"

    def test_zero_global_id(self, plan):
        m = netplan.derive_ipv6_plan(plan, 0)
        assert str(m["Fixed"]) == "fd00::/64"

    def test_injective(self, plan):
        m = netplan.derive_ipv6_plan(plan, 7)
        assert len(set(m.values())) == len(m)
        leaves = [m[s.name] for s in plan.leaves()]
        assert len(set(leaves)) == 8

    def test_out_of_range(self, plan):
        with pytest.raises(ValueError):
            netplan.derive_ipv6_plan(plan, 2 ** 40)


class TestFirewallRendering:
    def test_contains_guest_deny(self, plan):
        text = netplan.render_firewall(plan)
        assert any("deny" in line and "Guest" in line for line in text.splitlines())

    def test_round_trip(self, plan):
        text = netplan.render_firewall(plan)
        assert netplan.parse_firewall(text) == plan.policy

    def test_catch_all_only(self):
        root, children = netplan._default_subnets()
        catch_all = (netplan.PolicyRule(999, "*", "*", "*", "any", "*", Verdict.DENY),)
        plan = netplan.SubnetPlan(root, children, catch_all)
        assert netplan.render_firewall(plan).count("\n") == 1


class TestTunnelScope:
    def test_default_scope(self, plan):
        assert netplan.tunnel_scope(plan) == {ipaddress.IPv4Network("192.168.32.0/20")}

    def test_scope_disjoint_from_guest_and_main(self, plan):
        scope = netplan.tunnel_scope(plan)
        for name in ("Guest", "Main"):
            for block in scope:
                assert not block.overlaps(plan.subnet(name).network)

    def test_no_iot_warns_empty(self):
        root, children = netplan._default_subnets()
        kept = tuple(s for s in children
                     if s.category not in (Category.IOT_RESTRICTED, Category.IOT_OUTGOING)
                     and s.name != "IoT")
        plan = netplan.SubnetPlan(root, kept, netplan.default_policy())
        with pytest.warns(UserWarning):
            assert netplan.tunnel_scope(plan) == set()
