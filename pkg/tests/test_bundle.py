"""Bundle serialization and compilation.

Canonical form is pinned exactly: sorted keys, two-space indent, UTF-8
with a trailing newline, numbers at twelve significant digits. The
sore-throat fixture doubles as the reference model for the expansion
checks; its voice table must reproduce the shared-row probability
p(NORMAL | STREP THROAT) = 0.9.
"""

import copy

import numpy as np
import pytest

from simnet.bundle import (
    BundleError,
    canonical_dumps,
    canonical_loads,
    compile_bundle,
    load_bundle,
    network_id,
    save_bundle,
)
from simnet.inference import Evidence, posterior

from _bundles import ABDOMINAL, COINS, FIXTURES, SORE_THROAT, doc


def load_doc(document):
    return load_bundle(canonical_dumps(document))


def diagnostics_of(document):
    with pytest.raises(BundleError) as err:
        load_doc(document)
    return err.value.diagnostics


def assert_diagnostic(document, path, *needles):
    diags = diagnostics_of(document)
    hits = [d for d in diags if d.startswith(path + ":")]
    assert hits, f"no diagnostic at {path}: {diags}"
    for needle in needles:
        assert any(needle in d for d in hits), f"{needle!r} not in {hits}"


NOARC = {
    "metadata": {"name": "chain", "version": "1"},
    "variables": [
        {"name": "h", "instances": ["a", "b"]},
        {"name": "y", "instances": ["y0", "y1"]},
        {"name": "x", "instances": ["x0", "x1"]},
    ],
    "distinguished": "h",
    "priors": {"a": 0.5, "b": 0.5},
    "similarity_graph": [["a", "b"]],
    "local_maps": [
        {"pair": ["a", "b"], "variables": ["y", "x"], "arcs": [["h", "y"], ["y", "x"]]},
    ],
    "partitions": {
        "y": [
            {
                "conditioning": {},
                "sets": [
                    {"name": "A", "members": ["a"]},
                    {"name": "B", "members": ["b"]},
                ],
                "rows": [[0.7, 0.3], [0.2, 0.8]],
            },
        ],
        "x": [
            {
                "conditioning": {"y": "y0"},
                "sets": [{"name": "ALL", "members": ["a", "b"]}],
                "rows": [[0.6, 0.4]],
            },
            {
                "conditioning": {"y": "y1"},
                "sets": [{"name": "ALL", "members": ["a", "b"]}],
                "rows": [[0.1, 0.9]],
            },
        ],
    },
}


class TestCanonicalJson:
    def test_formatting_is_pinned(self):
        text = canonical_dumps({"b": 0.1, "a": [1, 2.5, 1.0], "e": [], "o": {}})
        assert text == (
            '{\n'
            '  "a": [\n'
            '    1,\n'
            '    2.5,\n'
            '    1\n'
            '  ],\n'
            '  "b": 0.1,\n'
            '  "e": [],\n'
            '  "o": {}\n'
            '}\n'
        )

    def test_floats_use_twelve_significant_digits(self):
        assert canonical_dumps(0.123456789012345) == "0.123456789012\n"
        assert canonical_dumps(1e-07) == "1e-07\n"
        assert canonical_dumps(0.54) == "0.54\n"

    def test_non_ascii_kept_verbatim(self):
        assert "café" in canonical_dumps({"s": "café"})

    def test_non_finite_rejected(self):
        with pytest.raises(BundleError):
            canonical_dumps({"x": float("inf")})
        with pytest.raises(BundleError):
            canonical_dumps({"x": float("nan")})

    def test_duplicate_keys_rejected_on_load(self):
        with pytest.raises(BundleError, match="duplicate"):
            canonical_loads('{"a": 1, "a": 2}')

    def test_dumps_then_loads_is_identity_on_parsed_values(self):
        text = canonical_dumps(SORE_THROAT)
        assert canonical_dumps(canonical_loads(text)) == text


class TestRoundTrip:
    @pytest.mark.parametrize(
        "name", ["sore_throat.json", "inconsistent_chain.json", "abdominal.json", "coins.json"]
    )
    def test_save_of_load_is_byte_identical(self, name):
        text = canonical_dumps(FIXTURES[name])
        assert save_bundle(load_bundle(text)) == text

    @pytest.mark.parametrize("name", sorted(FIXTURES))
    def test_checked_in_fixture_files_are_canonical(self, name, fixtures_dir):
        on_disk = (fixtures_dir / name).read_text(encoding="utf-8")
        assert on_disk == canonical_dumps(FIXTURES[name])

    def test_load_accepts_bytes(self):
        b = load_bundle(canonical_dumps(COINS).encode("utf-8"))
        assert b.name == "coins"

    def test_network_id_shape_and_stability(self):
        a = network_id(load_doc(SORE_THROAT))
        b = network_id(load_doc(SORE_THROAT))
        assert a == b
        assert a.startswith("n-") and len(a) == 14
        assert set(a[2:]) <= set("0123456789abcdef")
        assert a != network_id(load_doc(COINS))


class TestSchemaDiagnostics:
    def test_top_level_must_be_an_object(self):
        with pytest.raises(BundleError, match=r"\$"):
            load_bundle("[]")

    def test_missing_required_key(self):
        d = doc("coins.json")
        del d["priors"]
        assert_diagnostic(d, "$", "priors")

    def test_unknown_top_level_key(self):
        d = doc("coins.json")
        d["bogus"] = 1
        assert_diagnostic(d, "$", "bogus")

    def test_metadata_needs_name(self):
        d = doc("coins.json")
        del d["metadata"]["name"]
        assert_diagnostic(d, "$.metadata", "name")

    def test_duplicate_instances_are_located(self):
        d = doc("coins.json")
        d["variables"][1]["instances"] = ["neg", "neg"]
        assert_diagnostic(d, "$.variables[1]", "duplicate")

    def test_instance_entries_must_be_strings(self):
        d = doc("coins.json")
        d["variables"][1]["instances"] = ["neg", 3]
        assert_diagnostic(d, "$.variables[1].instances[1]", "string")

    def test_unknown_distinguished(self):
        d = doc("coins.json")
        d["distinguished"] = "q"
        assert_diagnostic(d, "$.distinguished", "q")

    def test_prior_keys_must_match_hypotheses(self):
        d = doc("coins.json")
        d["priors"] = {"d1": 0.5, "dX": 0.5}
        assert_diagnostic(d, "$.priors")

    def test_priors_must_sum_to_one(self):
        d = doc("coins.json")
        d["priors"] = {"d1": 0.5, "d2": 0.4}
        assert_diagnostic(d, "$.priors", "sum")

    def test_negative_prior(self):
        d = doc("coins.json")
        d["priors"] = {"d1": 1.5, "d2": -0.5}
        assert_diagnostic(d, "$.priors", "negative")

    def test_prior_values_must_be_numbers(self):
        d = doc("coins.json")
        d["priors"] = {"d1": "big", "d2": 0.5}
        assert_diagnostic(d, "$.priors.d1", "number")

    def test_graph_edge_with_unknown_hypothesis(self):
        d = doc("coins.json")
        d["similarity_graph"] = [["d1", "dX"]]
        assert_diagnostic(d, "$.similarity_graph[0]", "dX")

    def test_local_pair_must_be_a_graph_edge(self):
        d = doc("abdominal.json")
        d["local_maps"][0]["pair"] = ["NORMAL", "APPENDICITIS"]
        assert_diagnostic(d, "$.local_maps[0].pair")

    def test_local_map_for_every_edge(self):
        d = doc("abdominal.json")
        del d["local_maps"][1]
        assert_diagnostic(d, "$.local_maps", "no local map")

    def test_duplicate_local_map(self):
        d = doc("abdominal.json")
        d["local_maps"].append(copy.deepcopy(d["local_maps"][0]))
        assert_diagnostic(d, "$.local_maps[2].pair", "duplicate")

    def test_local_variables_must_be_declared(self):
        d = doc("coins.json")
        d["local_maps"][0]["variables"] = ["f", "zz"]
        assert_diagnostic(d, "$.local_maps[0].variables[1]", "zz")

    def test_distinguished_is_implicit_in_locals(self):
        d = doc("coins.json")
        d["local_maps"][0]["variables"] = ["disease", "f"]
        assert_diagnostic(d, "$.local_maps[0].variables[0]", "implicit")

    def test_arc_endpoints_must_belong_to_the_local(self):
        d = doc("coins.json")
        d["local_maps"][0]["arcs"] = [["disease", "f"], ["disease", "zz"]]
        assert_diagnostic(d, "$.local_maps[0].arcs[1]", "zz")

    def test_unused_declared_variable(self):
        d = doc("coins.json")
        d["variables"].append({"name": "w", "instances": ["w0", "w1"]})
        assert_diagnostic(d, "$.variables[2]", "not used")

    def test_partition_for_unknown_feature(self):
        d = doc("coins.json")
        d["partitions"]["zz"] = d["partitions"]["f"]
        assert_diagnostic(d, "$.partitions", "zz")

    def test_partitions_required_for_every_feature(self):
        d = doc("abdominal.json")
        del d["partitions"]["ANOREXIA"]
        assert_diagnostic(d, "$.partitions", "ANOREXIA")

    def test_row_length_must_match_cardinality(self):
        d = doc("sore_throat.json")
        d["partitions"]["FEVER"][0]["rows"][1] = [0.5, 0.5]
        assert_diagnostic(d, "$.partitions.FEVER[0].rows[1]", "3")

    def test_row_must_normalize(self):
        d = doc("coins.json")
        d["partitions"]["f"][0]["rows"][0] = [0.5, 0.3]
        assert_diagnostic(d, "$.partitions.f[0].rows[0]", "sum")

    def test_negative_row_entry(self):
        d = doc("coins.json")
        d["partitions"]["f"][0]["rows"][0] = [1.2, -0.2]
        assert_diagnostic(d, "$.partitions.f[0].rows[0]", "negative")

    def test_sets_and_rows_counts_must_agree(self):
        d = doc("coins.json")
        d["partitions"]["f"][0]["rows"] = [[0.9, 0.1]]
        assert_diagnostic(d, "$.partitions.f[0]", "1")

    def test_set_member_must_be_a_hypothesis(self):
        d = doc("coins.json")
        d["partitions"]["f"][0]["sets"][0]["members"] = ["zz"]
        assert_diagnostic(d, "$.partitions.f[0].sets[0]", "zz")

    def test_conditioning_variable_must_exist(self):
        d = doc("abdominal.json")
        d["partitions"]["ANOREXIA"][0]["conditioning"] = {"zz": "q"}
        assert_diagnostic(d, "$.partitions.ANOREXIA[0].conditioning", "zz")

    def test_conditioning_instance_must_exist(self):
        d = doc("abdominal.json")
        d["partitions"]["ANOREXIA"][0]["conditioning"] = {"PERITONITIS": "MAYBE"}
        assert_diagnostic(d, "$.partitions.ANOREXIA[0].conditioning", "MAYBE")

    def test_utilities_diagonal_rule_is_surfaced(self):
        d = doc("coins.json")
        d["utilities"]["rows"] = [[0, -100], [-10, -20]]
        assert_diagnostic(d, "$.utilities", "diagonal")

    def test_utilities_hypothesis_order_is_fixed(self):
        d = doc("coins.json")
        d["utilities"]["hypotheses"] = ["d2", "d1"]
        assert_diagnostic(d, "$.utilities.hypotheses", "declaration order")

    def test_utilities_need_exactly_one_form(self):
        d = doc("coins.json")
        d["utilities"] = {"rows": [[0, -1], [-1, 0]]}
        assert_diagnostic(d, "$.utilities")

    def test_cost_for_unknown_feature(self):
        d = doc("coins.json")
        d["costs"]["features"]["zz"] = 1
        assert_diagnostic(d, "$.costs.features", "zz")

    def test_negative_cost(self):
        d = doc("coins.json")
        d["costs"]["features"]["f"] = -1
        assert_diagnostic(d, "$.costs.features", "negative")

    def test_multiple_diagnostics_are_collected(self):
        d = doc("coins.json")
        del d["metadata"]["name"]
        d["priors"] = {"d1": 0.5, "d2": 0.4}
        diags = diagnostics_of(d)
        assert len(diags) >= 2


class TestGroupedUtilities:
    def test_group_form_expands(self):
        d = doc("coins.json")
        d["utilities"] = {
            "group_of": {"d1": "benign", "d2": "grave"},
            "groups": ["benign", "grave"],
            "rows": [[0, -100], [-20, 0]],
        }
        b = load_doc(d)
        assert b.utilities.value("d1", "d2") == -100.0
        assert b.utilities.value("d2", "d1") == -20.0
        assert b.utilities.value("d2", "d2") == 0.0

    def test_group_form_errors_are_located(self):
        d = doc("coins.json")
        d["utilities"] = {
            "group_of": {"d1": "benign"},
            "groups": ["benign"],
            "rows": [[0]],
        }
        assert_diagnostic(d, "$.utilities", "d2")


@pytest.fixture(scope="module")
def compiled():
    return compile_bundle(load_doc(SORE_THROAT))


class TestCompileSoreThroat:
    def test_verdict_is_consistent(self, compiled):
        assert compiled.verdict.is_consistent
        assert compiled.model is not None

    def test_variable_order_follows_the_document(self, compiled):
        assert compiled.model.map.names == (
            "DISEASE",
            "PALATAL SPOTS",
            "QUALITY OF VOICE",
            "TONSILS INVOLVED",
            "TONSILLAR PUS",
            "FEVER",
            "ABDOMINAL PAIN",
            "TOXIC APPEARANCE",
        )

    def test_global_arcs_are_the_union_of_the_locals(self, compiled):
        h = "DISEASE"
        want = {(h, f) for f in compiled.model.map.names if f != h}
        want |= {
            ("TONSILS INVOLVED", "TONSILLAR PUS"),
            ("FEVER", "TOXIC APPEARANCE"),
            ("ABDOMINAL PAIN", "TOXIC APPEARANCE"),
        }
        assert set(compiled.model.map.arcs) == want

    def test_clusters(self, compiled):
        got = {frozenset(c) for c in compiled.clusters.clusters}
        assert got == {
            frozenset({"PALATAL SPOTS"}),
            frozenset({"QUALITY OF VOICE"}),
            frozenset({"TONSILS INVOLVED", "TONSILLAR PUS"}),
            frozenset({"FEVER", "ABDOMINAL PAIN", "TOXIC APPEARANCE"}),
        }

    def test_prior_table(self, compiled):
        t = compiled.model.table("DISEASE")
        assert t.parents == ()
        assert np.array_equal(t.rows, [[0.54, 0.3, 0.1, 0.04, 0.02]])

    def test_voice_rows_are_shared_across_the_partition(self, compiled):
        t = compiled.model.table("QUALITY OF VOICE")
        assert t.parents == ("DISEASE",)
        assert np.array_equal(
            t.rows,
            [[0.9, 0.1], [0.9, 0.1], [0.9, 0.1], [0.9, 0.1], [0.3, 0.7]],
        )

    def test_voice_normal_given_strep(self, compiled):
        t = compiled.model.table("QUALITY OF VOICE")
        assert t.rows[1, 0] == 0.9

    def test_toxic_row_for_mono_high_fever(self, compiled):
        t = compiled.model.table("TOXIC APPEARANCE")
        assert t.parents == ("DISEASE", "FEVER", "ABDOMINAL PAIN")
        row = int(np.ravel_multi_index((2, 2, 0), (5, 3, 2)))
        assert np.array_equal(t.rows[row], [0.6, 0.4])

    def test_pus_row_for_strep_both_tonsils(self, compiled):
        t = compiled.model.table("TONSILLAR PUS")
        assert t.parents == ("DISEASE", "TONSILS INVOLVED")
        row = int(np.ravel_multi_index((1, 2), (5, 3)))
        assert np.array_equal(t.rows[row], [0.2, 0.8])

    def test_empty_evidence_posterior_returns_the_priors(self, compiled):
        diff = posterior(compiled.model, Evidence(()))
        want = dict(zip(compiled.model.map.variable("DISEASE").instances,
                        [0.54, 0.3, 0.1, 0.04, 0.02]))
        for label, p in diff.entries:
            assert abs(p - want[label]) < 1e-12

    def test_no_warnings(self, compiled):
        assert compiled.warnings == ()

    def test_compile_is_deterministic(self):
        b1 = load_doc(SORE_THROAT)
        b2 = load_doc(SORE_THROAT)
        c1, c2 = compile_bundle(b1), compile_bundle(b2)
        assert network_id(c1.bundle) == network_id(c2.bundle)
        for name in c1.model.tables:
            assert np.array_equal(c1.model.table(name).rows, c2.model.table(name).rows)


class TestCompileInconsistent:
    def test_chain_fails_with_the_expected_witness(self):
        compiled = compile_bundle(load_doc(FIXTURES["inconsistent_chain.json"]))
        assert not compiled.verdict.is_consistent
        assert compiled.verdict.witness.describe() == "line 11, edge (h2,h3)"
        assert compiled.model is None
        assert compiled.clusters is None

    def test_repairs_name_edges_and_arcs(self):
        compiled = compile_bundle(load_doc(FIXTURES["inconsistent_chain.json"]))
        assert compiled.verdict.repairs
        for edge, arc in compiled.verdict.repairs:
            assert len(edge) == 2 and len(arc) == 2


class TestCompileAbdominal:
    def test_consistent_with_expected_parents(self):
        compiled = compile_bundle(load_doc(ABDOMINAL))
        assert compiled.verdict.is_consistent
        km = compiled.model.map
        assert km.parents_of("VAGINAL BLEEDING") == ("DISEASE",)
        t = compiled.model.table("ANOREXIA")
        assert np.array_equal(t.rows[1], [0.4, 0.6])


class TestCompileEdgeCases:
    def test_feature_without_hypothesis_arc_is_projected(self):
        compiled = compile_bundle(load_doc(NOARC))
        t = compiled.model.table("x")
        assert t.parents == ("y",)
        assert np.array_equal(t.rows, [[0.6, 0.4], [0.1, 0.9]])
        assert ("h", "x") not in compiled.model.map.arcs

    def test_partition_may_not_distinguish_without_an_arc(self):
        d = copy.deepcopy(NOARC)
        d["partitions"]["x"] = [
            {
                "conditioning": {"y": "y0"},
                "sets": [
                    {"name": "A", "members": ["a"]},
                    {"name": "B", "members": ["b"]},
                ],
                "rows": [[0.6, 0.4], [0.5, 0.5]],
            },
            d["partitions"]["x"][1],
        ]
        with pytest.raises(BundleError, match="distinguish"):
            compile_bundle(load_doc(d))

    def test_missing_conditioning_instance_is_reported(self):
        d = copy.deepcopy(NOARC)
        d["partitions"]["x"] = d["partitions"]["x"][:1]
        with pytest.raises(BundleError) as err:
            compile_bundle(load_doc(d))
        assert any("y1" in s and s.startswith("$.partitions.x") for s in err.value.diagnostics)

    def test_conditioning_on_a_non_parent_is_reported(self):
        d = doc("abdominal.json")
        d["partitions"]["ANOREXIA"][0]["conditioning"] = {"PERITONITIS": "ABSENT"}
        with pytest.raises(BundleError, match="parents"):
            compile_bundle(load_doc(d))

    def test_all_zero_row_on_a_reachable_event_is_an_error(self):
        d = {
            "metadata": {"name": "zr", "version": "1"},
            "variables": [
                {"name": "h", "instances": ["a", "b"]},
                {"name": "x", "instances": ["x0", "x1"]},
                {"name": "y", "instances": ["y0", "y1"]},
            ],
            "distinguished": "h",
            "priors": {"a": 0.5, "b": 0.5},
            "similarity_graph": [["a", "b"]],
            "local_maps": [
                {
                    "pair": ["a", "b"],
                    "variables": ["x", "y"],
                    "arcs": [["h", "x"], ["x", "y"]],
                },
            ],
            "partitions": {
                "x": [
                    {
                        "conditioning": {},
                        "sets": [
                            {"name": "A", "members": ["a"]},
                            {"name": "B", "members": ["b"]},
                        ],
                        "rows": [[1, 0], [0, 1]],
                    },
                ],
                "y": [
                    {
                        "conditioning": {"x": "x0"},
                        "sets": [{"name": "ALL", "members": ["a", "b"]}],
                        "rows": [[0.3, 0.7]],
                    },
                    {
                        "conditioning": {"x": "x1"},
                        "sets": [{"name": "ALL", "members": ["a", "b"]}],
                        "rows": [[0, 0]],
                    },
                ],
            },
        }
        with pytest.raises(BundleError) as err:
            compile_bundle(load_doc(d))
        assert any("all-zero" in s for s in err.value.diagnostics)

    def test_assessed_row_on_an_unreachable_event_warns(self):
        d = {
            "metadata": {"name": "zw", "version": "1"},
            "variables": [
                {"name": "h", "instances": ["a", "b"]},
                {"name": "x", "instances": ["x0", "x1"]},
                {"name": "y", "instances": ["y0", "y1"]},
            ],
            "distinguished": "h",
            "priors": {"a": 0.5, "b": 0.5},
            "similarity_graph": [["a", "b"]],
            "local_maps": [
                {
                    "pair": ["a", "b"],
                    "variables": ["x", "y"],
                    "arcs": [["h", "x"], ["x", "y"]],
                },
            ],
            "partitions": {
                "x": [
                    {
                        "conditioning": {},
                        "sets": [
                            {"name": "A", "members": ["a"]},
                            {"name": "B", "members": ["b"]},
                        ],
                        "rows": [[1, 0], [1, 0]],
                    },
                ],
                "y": [
                    {
                        "conditioning": {"x": "x0"},
                        "sets": [{"name": "ALL", "members": ["a", "b"]}],
                        "rows": [[0.3, 0.7]],
                    },
                    {
                        "conditioning": {"x": "x1"},
                        "sets": [{"name": "ALL", "members": ["a", "b"]}],
                        "rows": [[0.2, 0.8]],
                    },
                ],
            },
        }
        compiled = compile_bundle(load_doc(d))
        assert compiled.verdict.is_consistent
        assert any("unreachable" in w for w in compiled.warnings)


class TestBundleAccessors:
    def test_typed_fields(self):
        b = load_doc(COINS)
        assert b.name == "coins"
        assert b.version == "1"
        assert b.distinguished == "disease"
        assert b.hypotheses == ("d1", "d2")
        assert b.prior == (0.5, 0.5)
        assert b.network.graph.edges == (("d1", "d2"),)
        assert b.costs.cost("f") == 1.0
        assert b.costs.cost("other") == 0.0
        assert b.utilities.value("d1", "d1") == 0.0

    def test_optional_sections_default_to_none(self):
        b = load_doc(ABDOMINAL)
        assert b.utilities is None
        assert b.costs is None
