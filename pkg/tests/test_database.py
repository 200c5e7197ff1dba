"""SQLite report store"""

import math

from lib import database
from lib.bound_zoo import architecture_comparison, fnn_bounds
from lib.bundle import gen_weights, mixed_spec
from lib.types import BoundFamily, LayerNorms, NormMode, VerificationResult


def mixed_report():
    bundle = gen_weights(mixed_spec(), seed=0)
    return architecture_comparison(bundle.spec, bundle.weights, NormMode.EXACT)


class TestReports:
    def test_round_trip(self, db_path):
        report = mixed_report()
        report_id = database.save_report(report, "mixed.json")
        stored = database.get_report(report_id)
        assert db_path.exists()
        assert stored['bundle'] == "mixed.json"
        assert stored['mode'] == 'exact'
        assert stored['ignore_n'] is True
        assert [b['family'] for b in stored['bounds']] == [b.family.value for b in report.bounds]
        assert stored['bounds'][0]['log10_value'] == report.bounds[0].log10_value
        assert len(stored['layers']) == 4
        assert stored['layers'][0]['kind'] == 'standard'

    def test_missing(self, db_path):
        assert database.get_report("nope") is None

    def test_newest_first(self, db_path):
        first = database.save_report(mixed_report(), "first")
        second = database.save_report(mixed_report(), "second")
        assert [r['id'] for r in database.list_reports()] == [second, first]
        assert len(database.list_reports(limit=1)) == 1

    def test_delete(self, db_path):
        report_id = database.save_report(mixed_report(), "gone")
        database.delete_report(report_id)
        assert database.get_report(report_id) is None

    def test_overflow_stored_as_null(self, db_path):
        norms = [LayerNorms(a=1e300, s=1e300, n21=1e300)] * 3
        report_id = database.save_report(fnn_bounds(norms, d_max=1, L=3, n=1), "huge")
        stored = {b['family']: b for b in database.get_report(report_id)['bounds']}
        li = stored[BoundFamily.LI18.value]
        assert li['value'] is None
        assert li['overflow'] is True
        assert math.isfinite(li['log10_value'])


class TestVerifyRuns:
    def test_round_trip(self, db_path):
        results = [
            VerificationResult('a', 10, 0, 1e-15, 1e-13),
            VerificationResult('b', 10, 2, 0.5, 1e-10),
        ]
        run_id = database.save_verify_run(results, "net.json", 10, 3)
        runs = database.list_verify_runs()
        assert runs[0]['id'] == run_id
        assert runs[0]['passed'] is False
        assert runs[0]['seed'] == 3
        assert [r['name'] for r in runs[0]['results']] == ['a', 'b']

    def test_all_passed(self, db_path):
        database.save_verify_run([VerificationResult('a', 1, 0, 0.0, 1e-13)], None, 1, 0)
        assert database.list_verify_runs()[0]['passed'] is True
