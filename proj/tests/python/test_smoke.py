import json
from pathlib import Path

import pytest

import cwms

ROOT = Path(__file__).resolve().parents[2]
CASA = ROOT / "data" / "casa"


def casa_plan(catalog="catalog-docker.yaml", sites="sites-nonshared.yaml", **options):
    return cwms.plan_files(CASA / "workflow.yaml", CASA / catalog, CASA / sites, **options)


def test_listing_catalog_round_trips():
    text = (ROOT / "tests" / "fixtures" / "catalog_listing.yaml").read_text()
    canonical = cwms.normalize_catalog(text)
    assert cwms.normalize_catalog(canonical) == canonical
    assert "docker:///rynge/montage:latest" in canonical


def test_image_url():
    assert cwms.parse_image_url("docker:///rynge/montage:latest") == ("docker", "rynge/montage", "latest")


def test_errors_carry_codes():
    with pytest.raises(cwms.CwmsError) as exc:
        cwms.parse_image_url("ftp://x/y")
    assert cwms.error_code(exc.value) == "UnknownScheme"

    cyclic = "tasks:\n  - {id: a, transformation: 'x::y:1'}\n  - {id: b, transformation: 'x::y:1'}\nedges: [[a, b], [b, a]]\n"
    with pytest.raises(cwms.CwmsError) as exc:
        cwms.topological_levels(cyclic)
    assert cwms.error_code(exc.value) == "CycleDetected"


def test_casa_levels():
    levels = cwms.topological_levels((CASA / "workflow.yaml").read_text())
    assert len(levels) == 63
    assert sorted(set(levels.values())) == [0, 1, 2]


def test_plan_counts_and_clustering():
    k1 = cwms.job_counts(casa_plan())
    assert k1["Compute"] == 63
    assert k1["ContainerFetch"] == 1
    assert cwms.job_counts(casa_plan(cluster_size=12))["Compute"] == 6
    assert json.loads(casa_plan())["jobs"]


def test_wrappers():
    scripts = cwms.render_wrappers(casa_plan())
    assert len(scripts) == 63
    assert all(s.startswith("#!/bin/bash") for s in scripts.values())
    assert all(":/scratch" in s for s in scripts.values())


def test_mock_run_and_failure():
    ewf = casa_plan(cluster_size=12)
    report = cwms.run_mock(ewf, slots=4)
    assert report["image_loads"] == 1
    assert all(j["status"] == "Succeeded" for j in report["jobs"])

    failed = cwms.run_mock(ewf, fail_step="StageIn")
    statuses = {j["status"] for j in failed["jobs"]}
    assert "Failed" in statuses and "NotRun" in statuses


def test_simulate_is_deterministic(tmp_path):
    ewf = casa_plan()
    a = cwms.simulate(ewf, CASA / "topology-nonshared.yaml", seed=3, report_dir=str(tmp_path / "a"))
    b = cwms.simulate(ewf, CASA / "topology-nonshared.yaml", seed=3, report_dir=str(tmp_path / "b"))
    assert a == b
    assert a["transfer_count_by_kind"]["ContainerImage"] == 63
    assert a["total_egress_bytes"] == pytest.approx(a["transferred_bytes"], rel=1e-9)
    for name in ("summary.tsv", "egress.tsv", "timeline.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_trend():
    rows = {r["label"]: r for r in cwms.sweep(str(CASA / "scenarios.yaml"))}
    assert rows["none-k1"]["makespan_s"] < rows["singularity-k1"]["makespan_s"] < rows["docker-k1"]["makespan_s"]
    assert rows["docker-symlink-k1"]["image_bytes_from_submit"] == 488_000_000
