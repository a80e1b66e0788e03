from env_check import smoke_norm, smoke_quantile, try_import


def test_core_imports():
    for name in ("numpy", "scipy", "pandas", "pydantic"):
        assert try_import(name) is not None
    assert try_import("definitely_not_a_module_xyz") is None


def test_smoke_checks_pass():
    assert smoke_norm()
    assert smoke_quantile()
