"""Typed configuration objects for experiment scenarios.

A configuration class declares its fields as annotated class attributes
with defaults. Values are validated with pydantic whenever they are set,
so a bad value fails at the line that sets it, with the field path in the
message.

Each direct subclass of :class:`ConfigBase` starts a *category* (target,
proposal, ...). Subclasses of a category register under their lowercase
class name (or an explicit ``_config_name``) and can be selected by that
name, which is how a text scenario picks ``target = mixture``.
"""
from typing import Any, Callable, Dict, Optional, Type, Union, get_args, get_origin, get_type_hints
import reprlib

from pydantic import TypeAdapter, ValidationError


def field_types(cls) -> Dict[str, Any]:
    """Annotations of ``cls`` along the MRO, keeping ``Annotated`` constraints such as ``PositiveFloat``."""
    return get_type_hints(cls, include_extras=True)


def is_config_type(tp: Any) -> bool:
    """True if ``tp`` is a ConfigBase subclass or an Optional/Union containing one."""
    def is_config(cls):
        return isinstance(cls, type) and issubclass(cls, ConfigBase)
    if get_origin(tp) is Union:
        return any(is_config(arg) for arg in get_args(tp))
    return is_config(tp)


def config_member(tp: Any) -> Any:
    """The ConfigBase class inside ``Optional[...]``, or ``tp`` itself."""
    if get_origin(tp) is Union:
        for arg in get_args(tp):
            if isinstance(arg, type) and issubclass(arg, ConfigBase):
                return arg
    return tp


def parse_value_to_type(value: Any, field_type: Type, path: str = "") -> Any:
    """Validate ``value`` against ``field_type``.

    Strings are first decoded as JSON (so ``"[0.5, 0.5]"`` becomes a list),
    then validated as Python objects.

    Parameters
    ----------
    value : Any
    field_type : Type
    path : str
        Dotted path of the field, used in error messages.

    Raises
    ------
    TypeError
        If the value does not validate.
    """
    if is_config_type(field_type):
        member = config_member(field_type)
        if value is None or isinstance(value, member):
            return value
        raise TypeError(f"Value for field '{path}' must be a {member.__name__} config, got {type(value).__name__}")

    adapter = TypeAdapter(field_type)
    try:
        if isinstance(value, str):
            try:
                return adapter.validate_json(value)
            except ValidationError:
                pass
        return adapter.validate_python(value)
    except ValidationError as e:
        raise TypeError(
            f"Invalid value for field '{path}': expected {field_type}, "
            f"got {type(value).__name__}={reprlib.repr(value)}\n{e}"
        ) from None


def gather_defaults(cls) -> Dict[str, Any]:
    """Public class-level defaults along the MRO, children overriding parents."""
    defaults = {}
    for base in reversed(cls.__mro__):
        if base is object:
            continue
        for k, v in vars(base).items():
            if not k.startswith('_') and not callable(v) and not isinstance(v, (property, classmethod, staticmethod)):
                defaults[k] = v
    return defaults


class ConfigBase:
    """Base class of every configuration object.

    Notes
    -----
    Class attributes are not copied onto instances by Python, so
    ``__init__`` gathers the defaults of the whole MRO (see
    :func:`gather_defaults`) and sets them one by one, which also runs the
    validation of ``__setattr__`` on them.

    Passing ``_config_name`` to the constructor of a category class builds
    the registered subclass of that name instead.
    """
    _registry = {}  # type: Dict[str, Type["ConfigBase"]]
    _config_name: str = "configbase"
    _target_class: Optional[Callable] = None

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if "_config_name" not in cls.__dict__:
            cls._config_name = cls.__name__.lower()
        parent = cls.__bases__[0]
        if parent is ConfigBase:
            cls._registry = {}
        elif issubclass(parent, ConfigBase):
            parent._registry[cls._config_name] = cls

    @classmethod
    def _get_subclass_by_name(cls, config_name: Optional[str]) -> Type["ConfigBase"]:
        if not config_name:
            return cls
        config_name = config_name.lower()
        if config_name == cls._config_name:
            return cls
        if config_name in cls._registry:
            return cls._registry[config_name]
        raise ValueError(
            f"Unknown {cls.__name__} '{config_name}', should be one of: {sorted(cls._registry)}"
        )

    @classmethod
    def fields(cls) -> Dict[str, Any]:
        """Annotated public fields and their types."""
        return {k: v for k, v in field_types(cls).items() if not k.startswith('_')}

    def __new__(cls, **kwargs):
        config_name = kwargs.get("_config_name")
        if config_name:
            subcls = cls._get_subclass_by_name(config_name)
            if subcls is not cls:
                return super(ConfigBase, subcls).__new__(subcls)
        return super().__new__(cls)

    def __init__(self, **kwargs):
        kwargs.pop("_config_name", None)
        all_defaults = gather_defaults(type(self))
        for name, field_type in self.fields().items():
            if name not in all_defaults and name not in kwargs:
                raise ValueError(f"Missing required field '{type(self).__name__}.{name}' of type {field_type}")
        unknown = set(kwargs) - set(self.fields()) - set(all_defaults)
        if unknown:
            raise ValueError(f"Unknown field(s) {sorted(unknown)} for {type(self).__name__}")

        for k, v in all_defaults.items():
            setattr(self, k, v)
        for k, v in kwargs.items():
            setattr(self, k, v)

    def __setattr__(self, name: str, value: Any) -> None:
        if not name.startswith('_'):
            type_hints = field_types(type(self))
            if name in type_hints:
                path = f"{self.__class__.__name__}.{name}"
                value = parse_value_to_type(value, type_hints[name], path=path)
        super().__setattr__(name, value)

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        attrs = ", ".join(f"{k}={v!r}" for k, v in vars(self).items() if not k.startswith('_'))
        return f"{self.__class__.__name__}({attrs})"

    def to_dict(self, flatten: bool = False, parent_key: str = "") -> Dict[str, Any]:
        """Nested (or dot-flattened) dictionary of the field values.

        Nested configs are represented with their ``_config_name`` so that
        the dictionary can be turned back into the same classes.
        """
        result = {}
        for name, value in vars(self).items():
            if name.startswith('_'):
                continue
            key = f"{parent_key}.{name}" if parent_key else name
            if isinstance(value, ConfigBase):
                if flatten:
                    result[f"{key}._config_name"] = value._config_name
                    result.update(value.to_dict(flatten=True, parent_key=key))
                else:
                    result[name] = {"_config_name": value._config_name, **value.to_dict()}
            else:
                result[key if flatten else name] = value
        return result

    def instantiate(self, *args, **kwargs) -> Any:
        """Build ``_target_class`` from the field values; ``kwargs`` override fields.

        Raises
        ------
        NotImplementedError
            If the class defines no ``_target_class``.
        """
        target = getattr(type(self), "_target_class", None)
        if target is None:
            raise NotImplementedError(
                f"{self.__class__.__name__} must either define _target_class or override instantiate()"
            )
        params = {k: v for k, v in vars(self).items() if not k.startswith('_')}
        return target(*args, **{**params, **kwargs})
