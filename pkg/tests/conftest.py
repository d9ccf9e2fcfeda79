from pathlib import Path

import pytest

from obdascale.intervals import build_plan, effective_fixed_domain, merge_clusters
from obdascale.mappings import detect_fixed_domain, extract_preclusters, read_mappings
from obdascale.schema import read_schema
from obdascale.stats import scan_instance, venn_profile

from .helpers import ACCEPTANCE

NPD = Path(__file__).parent / "fixtures" / "npd"


@pytest.fixture
def npd_dir():
    return NPD


@pytest.fixture
def npd_schema():
    return read_schema(NPD / "schema.txt")


@pytest.fixture
def npd_mappings(npd_schema):
    return read_mappings(NPD / "mappings.txt", npd_schema)


@pytest.fixture
def make_npd_plan(npd_schema, npd_mappings):
    """Plan the NPD fixture at scale s; returns (plan, seed stats)."""

    def make(s):
        fixed = effective_fixed_domain(npd_schema, detect_fixed_domain(npd_mappings, npd_schema))
        clusters = merge_clusters(extract_preclusters(npd_mappings, npd_schema), npd_schema)
        stats = scan_instance(npd_schema, NPD, fixed)
        venns = {cc.columns: venn_profile(cc.columns, NPD, npd_schema) for cc in clusters}
        return build_plan(npd_schema, stats, s, fixed, clusters, venns), stats

    return make


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
