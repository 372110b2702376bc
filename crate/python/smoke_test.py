"""End-to-end exercise of the nestfrag_py extension module.

Build and place the module first:

    cargo build -p nestfrag-py --release
    cp target/release/libnestfrag_py.so python/nestfrag_py.so

then run `python3 python/smoke_test.py`.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import nestfrag_py as nf


def test_partition_round_trip():
    p = nf.Partition("1,3|2")
    assert str(p) == "1,3|2"
    assert p.n == 3
    assert p.blocks() == [[1, 3], [2]]
    assert str(p.restrict(2)) == "1|2"


def test_nested_partition_order_and_distance():
    top = nf.NestedPartition.coarsest(4)
    bottom = nf.NestedPartition.finest(4)
    assert bottom.leq(top) and not top.leq(bottom)
    assert top.distance(top) == 0.0
    assert top.distance(bottom) > 0.0
    parsed = nf.NestedPartition("1,3|2 ; 1,2,3")
    assert parsed == nf.NestedPartition(str(parsed))
    assert str(parsed.zeta) == "1,3|2" and str(parsed.xi) == "1,2,3"


def test_params_json_round_trip():
    params = nf.Params.mixed_fixture()
    again = nf.Params.from_json(params.to_json())
    assert json.loads(again.to_json()) == json.loads(params.to_json())
    try:
        nf.Params.from_json('{"c_out": -1}')
    except ValueError:
        pass
    else:
        raise AssertionError("negative erosion coefficient accepted")


def test_generator_row():
    params = nf.Params.mixed_fixture()
    row = nf.generator_row(params, "1,2,3 ; 1,2,3")
    assert row, "coarsest state must have outgoing transitions"
    total = sum(rate for _, rate in row)
    assert total > 0
    for target, rate in row:
        assert rate > 0
        assert nf.NestedPartition(target).leq(nf.NestedPartition("1,2,3 ; 1,2,3"))


def test_simulate_deterministic_and_refining():
    params = nf.Params.mixed_fixture()
    a = nf.simulate(params, n=10, horizon=4.0, seed=42)
    b = nf.simulate(params, n=10, horizon=4.0, seed=42)
    assert a.to_jsonl() == b.to_jsonl()
    assert len(a) > 0
    prev = a.initial
    for ev in a.events():
        state = nf.NestedPartition(ev["state"])
        assert state.leq(prev), f"event at t={ev['t']} does not refine"
        prev = state
    assert a.final_state() == prev
    c = nf.simulate(params, n=10, horizon=4.0, seed=43)
    assert c.to_jsonl() != a.to_jsonl()


def test_newick_and_leaf_map():
    params = nf.Params.mixed_fixture()
    traj = nf.simulate(params, n=8, horizon=5.0, seed=7)
    species = traj.species_newick()
    gene = traj.gene_newick()
    assert species.endswith(";\n") and gene.endswith(";\n")
    leaf_map = json.loads(traj.leaf_map_json())
    assert len(leaf_map["species"]) == traj.final_state().xi.num_blocks
    assert len(leaf_map["genes"]) == traj.final_state().zeta.num_blocks
    for gene_leaf in leaf_map["genes"]:
        species_leaf = next(
            s for s in leaf_map["species"] if s["name"] == gene_leaf["species"]
        )
        assert set(gene_leaf["elements"]) <= set(species_leaf["elements"])


def test_enumerate_nested_counts():
    assert len(nf.enumerate_nested(2)) == 3
    assert len(nf.enumerate_nested(3)) == 12


def test_sample_univariate_lln():
    pi = nf.sample_univariate([0.6, 0.3], 20000, seed=5)
    sizes = sorted((len(b) for b in pi.blocks()), reverse=True)
    assert math.isclose(sizes[0] / 20000, 0.6, abs_tol=0.02)
    assert math.isclose(sizes[1] / 20000, 0.3, abs_tol=0.02)


def test_checks():
    params = nf.Params.mixed_fixture()
    for name in ("exchangeability", "consistency"):
        report = nf.check(params, name, n=3)
        assert report["verdict"] == "PASS", report
    report = nf.check(params, "empirical", n=2, jumps=4000, seed=1)
    assert report["passed"], report
    report = nf.check(nf.Params.binary_fixture(), "binary", n=3)
    assert report["verdict"] == "PASS", report
    assert report["details"], "ambiguous pairs should be reported"


def main():
    tests = [fn for name, fn in sorted(globals().items()) if name.startswith("test_")]
    for fn in tests:
        fn()
        print(f"ok {fn.__name__}")
    print(f"{len(tests)} smoke tests passed")


if __name__ == "__main__":
    main()
