"""Smoke test for the molenum extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import molenum


def main():
    assert molenum.count("C6H12O") == 211
    assert molenum.enumerate("CH4") == ["C"]
    assert len(molenum.enumerate("C2H6O", fragments=["CO"])) == 2
    assert molenum.count("C4H10O") == molenum.oracle_count("C4H10O") == 7
    assert len(molenum.enumerate("C6H6", max_models=3)) == 3
    assert molenum.canonical_smiles("OCC") == molenum.canonical_smiles("C(O)C")
    assert molenum.is_isomorphic("C1=CC=CC=C1", "C=1C=CC=CC=1")
    assert molenum.min_main_chain_len(10, 4) == 5
    try:
        molenum.count("C1H1")
    except ValueError as e:
        assert "infeasible" in str(e)
    else:
        raise AssertionError("infeasible formula accepted")
    print("ok")


if __name__ == "__main__":
    main()
