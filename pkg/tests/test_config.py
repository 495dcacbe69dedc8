import pytest

from flowalloc import ConfigError, ModelConfig, reference_config


def make_kwargs(**overrides):
    kw = dict(
        K=2,
        M=2,
        mean_rate=(1, 2),
        capacity=(3, 4),
        unit_power_cost=(1.0, 2.0),
        arrival_prob=0.5,
        type_prob=(0.5, 0.5),
        departure_prob=(0.3, 0.5),
        discount=0.9,
    )
    kw.update(overrides)
    return kw


def test_valid_config_builds():
    ModelConfig(**make_kwargs())


@pytest.mark.parametrize(
    "overrides,key",
    [
        (dict(mean_rate=(2, 1)), "mean_rate"),
        (dict(mean_rate=(1, 1)), "mean_rate"),
        (dict(type_prob=(0.5, 0.6)), "type_prob"),
        (dict(type_prob=(1.5, -0.5)), "type_prob"),
        (dict(capacity=(1, 4)), "capacity"),
        (dict(arrival_prob=1.5), "arrival_prob"),
        (dict(departure_prob=(0.3, 1.5)), "departure_prob"),
        (dict(discount=1.0), "discount"),
        (dict(discount=0.0), "discount"),
        (dict(mean_rate=(1,)), "mean_rate"),
    ],
)
def test_invalid_config_names_offending_key(overrides, key):
    with pytest.raises(ConfigError, match=key):
        ModelConfig(**make_kwargs(**overrides))


def test_from_dict_rejects_unknown_and_missing_keys():
    with pytest.raises(ConfigError, match="bogus"):
        ModelConfig.from_dict({**make_kwargs(), "bogus": 1})
    kw = make_kwargs()
    del kw["discount"]
    with pytest.raises(ConfigError, match="discount"):
        ModelConfig.from_dict(kw)


def test_toml_round_trip(tmp_path):
    path = tmp_path / "model.toml"
    path.write_text(
        "K = 2\nM = 2\nmean_rate = [1, 2]\ncapacity = [3, 4]\n"
        "unit_power_cost = [1.0, 2.0]\narrival_prob = 0.5\n"
        "type_prob = [0.5, 0.5]\ndeparture_prob = [0.3, 0.5]\ndiscount = 0.9\n"
    )
    cfg = ModelConfig.from_toml(path)
    assert cfg == ModelConfig(**make_kwargs())


def test_config_hash_is_stable_and_distinguishes():
    a = ModelConfig(**make_kwargs())
    b = ModelConfig(**make_kwargs())
    c = ModelConfig(**make_kwargs(discount=0.95))
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_reference_config_is_valid():
    cfg = reference_config()
    assert cfg.K == 5 and cfg.M == 2
    assert cfg.discount == 0.96
