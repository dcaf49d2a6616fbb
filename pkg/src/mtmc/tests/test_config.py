import pytest
from typing import List, Optional

from ..config import ConfigBase, config_member, gather_defaults, is_config_type, parse_value_to_type


class WalkLike:
    """Stands in for a sampler component built from a config."""
    def __init__(self, scale=1.0, dim=None):
        self.scale = scale
        self.dim = dim


def test_categories():
    """Direct subclasses start a category; their subclasses register by name."""
    class ShapeConfig(ConfigBase):
        size: float = 1.0

    class Square(ShapeConfig):
        sides: int = 4

    class Circle(ShapeConfig):
        _config_name = "round"
        radius: float = 0.5

    class OtherConfig(ConfigBase):
        pass

    assert Square._config_name == "square"
    assert Circle._config_name == "round"
    assert set(ShapeConfig._registry) == {"square", "round"}
    assert OtherConfig._registry == {}

    shape = ShapeConfig(_config_name="round", radius=2.0)
    assert isinstance(shape, Circle)
    assert shape.radius == 2.0
    assert shape.size == 1.0

    with pytest.raises(ValueError, match="Unknown ShapeConfig 'triangle'"):
        ShapeConfig(_config_name="triangle")


def test_required_and_unknown_fields():
    class RunConfig(ConfigBase):
        steps: int
        seed: int = 0

    with pytest.raises(ValueError, match="Missing required field 'RunConfig.steps'"):
        RunConfig()
    with pytest.raises(ValueError, match="Unknown field"):
        RunConfig(steps=1, verbose=True)
    assert RunConfig(steps=3).to_dict() == {"seed": 0, "steps": 3}


def test_type_validation():
    """Values are validated and coerced whenever they are set."""
    class TestConfig(ConfigBase):
        int_field: int = 1
        float_field: float = 1.0
        list_field: List[float] = [0.5, 0.5]
        optional_field: Optional[List[int]] = None

    cfg = TestConfig(int_field="2", float_field="2.5", list_field="[0.25, 0.75]")
    assert cfg.int_field == 2
    assert cfg.float_field == 2.5
    assert cfg.list_field == [0.25, 0.75]
    assert cfg.optional_field is None

    cfg.optional_field = "[1, 2]"
    assert cfg.optional_field == [1, 2]

    with pytest.raises(TypeError, match="Invalid value for field 'TestConfig.int_field'"):
        TestConfig(int_field="not_an_int")
    with pytest.raises(TypeError):
        cfg.list_field = ["not_a_float"]


def test_nested_config_fields():
    class InnerConfig(ConfigBase):
        value: int = 1

    class Inner(InnerConfig):
        pass

    class OuterConfig(ConfigBase):
        inner: InnerConfig = Inner()
        extra: Optional[InnerConfig] = None

    assert is_config_type(InnerConfig)
    assert is_config_type(Optional[InnerConfig])
    assert not is_config_type(int)
    assert config_member(Optional[InnerConfig]) is InnerConfig

    outer = OuterConfig()
    assert isinstance(outer.inner, Inner)
    assert outer.to_dict() == {"extra": None, "inner": {"_config_name": "inner", "value": 1}}
    assert outer.to_dict(flatten=True) == {"extra": None, "inner._config_name": "inner", "inner.value": 1}

    with pytest.raises(TypeError, match="must be a InnerConfig config"):
        outer.inner = 3
    with pytest.raises(TypeError):
        parse_value_to_type({"value": 1}, InnerConfig, path="outer.inner")


def test_gather_defaults():
    class BaseConfig(ConfigBase):
        a: int = 1
        b: int = 2

    class Child(BaseConfig):
        b: int = 3

        @property
        def total(self):
            return self.a + self.b

    assert gather_defaults(Child) == {"a": 1, "b": 3}
    assert Child().total == 4


def test_equality():
    class PointConfig(ConfigBase):
        x: float = 0.0

    assert PointConfig(x=1) == PointConfig(x=1.0)
    assert PointConfig(x=1) != PointConfig(x=2)
    assert "x=1.0" in repr(PointConfig(x=1))


def test_instantiate():
    class WalkConfig(ConfigBase):
        _target_class = WalkLike
        scale: float = 0.5

    walk = WalkConfig().instantiate(dim=3)
    assert isinstance(walk, WalkLike)
    assert (walk.scale, walk.dim) == (0.5, 3)
    assert WalkConfig().instantiate(scale=2.0).scale == 2.0

    class NoTarget(ConfigBase):
        x: int = 1

    with pytest.raises(NotImplementedError, match="must either define _target_class"):
        NoTarget().instantiate()
