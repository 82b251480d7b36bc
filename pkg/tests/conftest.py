import pytest

from hybridaug.corpus import load_manifest
from hybridaug.phantom import PhantomConfig, generate_corpus
from hybridaug.synthesis import extract_manifest_templates, save_template_store


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    reports = []
    for key in ("passed", "failed"):
        reports.extend(terminalreporter.stats.get(key, []))
    acceptance = [
        r
        for r in reports
        if getattr(r, "when", None) == "call" and "test_acceptance" in r.nodeid
    ]
    if not acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(acceptance, key=lambda r: r.nodeid):
        name = r.nodeid.split("::")[-1]
        status = "PASS" if r.passed else "FAIL"
        terminalreporter.write_line(f"{name}: {status} ({r.duration:.2f}s)")


@pytest.fixture(scope="session")
def corpus600(tmp_path_factory):
    """600-record phantom corpus on disk (75 per target class, 225 NT)."""
    root = tmp_path_factory.mktemp("corpus600")
    config = PhantomConfig.with_counts(
        75, 225, seed=42, eccentric_fraction=0.08, split_tag="train"
    )
    manifest, truths = generate_corpus(config, root)
    return {
        "root": root,
        "config": config,
        "manifest": manifest,
        "manifest_path": root / "manifest.jsonl",
        "truths": truths,
    }


@pytest.fixture(scope="session")
def store600(corpus600, tmp_path_factory):
    """Template store + pool extracted from the session corpus."""
    store_dir = tmp_path_factory.mktemp("store600")
    manifest = load_manifest(corpus600["manifest_path"])
    pool, report = extract_manifest_templates(manifest)
    save_template_store(store_dir, pool.donors, pool.acceptors)
    return {
        "dir": store_dir,
        "pool": pool,
        "report": report,
        "manifest": manifest,
    }
