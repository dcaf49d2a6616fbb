"""Plain-text scenario files and command-line overrides.

A scenario file holds one ``key = value`` assignment per line::

    # two-state chain
    name = two-state
    space = discrete
    space.n = 2
    [target]
    _config_name = discretetable
    masses = [0.75, 0.25]

Keys are dotted paths into the :class:`~mtmc.scenario.Scenario` tree; a
``[section]`` header prefixes the keys that follow it, and an empty ``[]``
header returns to top-level keys. Values are decoded
as JSON when possible and kept as strings otherwise. Assigning a string to
a category (``space = discrete``) selects the registered subclass.
"""
import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Type, Union

from .config import ConfigBase, config_member, field_types, is_config_type, parse_value_to_type

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MISSING = object()


class ScenarioError(ValueError):
    """Invalid scenario configuration.

    Attributes
    ----------
    field : str
        Dotted path of the offending field.
    line : int or None
        Line of the scenario file where the field was set, if known.
    """

    def __init__(self, field: str, message: str, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{location}: {message}")


@dataclass
class ScenarioText:
    """Flat ``key -> raw value`` assignments and the line each came from."""
    values: Dict[str, Any] = field(default_factory=dict)
    lines: Dict[str, int] = field(default_factory=dict)

    def update(self, overrides: Dict[str, Any]):
        for key, value in overrides.items():
            self.values[key] = value
            self.lines.pop(key, None)

    def line_of(self, path: str) -> Optional[int]:
        """Line of ``path`` or of its closest assigned parent."""
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rpartition(".")[0]
        return None


def parse_scenario_text(text: str, source: str = "<string>") -> ScenarioText:
    """Read ``key = value`` lines, ``[section]`` headers and ``#`` comments.

    ``[]`` ends the current section.
    """
    parsed = ScenarioText()
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ScenarioError(section or "<file>", f"expected 'key = value' in {source}, got {raw!r}", lineno)
        if section:
            key = f"{section}.{key}"
        if key in parsed.lines:
            raise ScenarioError(key, f"assigned twice (first on line {parsed.lines[key]})", lineno)
        parsed.values[key] = value
        parsed.lines[key] = lineno
    return parsed


def parse_overrides(args: Sequence[str]) -> Dict[str, str]:
    """``['--sampler.seed', '3', ...]`` to ``{'sampler.seed': '3', ...}``."""
    if len(args) % 2 != 0:
        raise ScenarioError("overrides", "arguments must be in pairs like: --sampler.n_samples 1000")
    overrides = {}
    for i in range(0, len(args), 2):
        if not args[i].startswith("--"):
            raise ScenarioError("overrides", f"expected an option like --key, got {args[i]!r}")
        overrides[args[i].lstrip("-")] = args[i + 1]
    return overrides


def update_nested_dict_from_flat(nested_dict: Dict, key: str, value: Any, separator: str = "."):
    """Set ``value`` at the dotted ``key`` of ``nested_dict`` in place.

    A string already stored where a sub-dictionary is needed is kept as the
    ``_config_name`` of that sub-dictionary.
    """
    head, sep, rest = key.partition(separator)
    if not sep:
        nested_dict[head] = value
        return
    if head in nested_dict and not isinstance(nested_dict[head], dict):
        nested_dict[head] = {"_config_name": nested_dict[head]}
    nested_dict.setdefault(head, {})
    update_nested_dict_from_flat(nested_dict[head], rest, value, separator=separator)


def flat_dict_to_nested(flat_dict: Dict[str, Any]) -> Dict[str, Any]:
    """Convert dotted keys to nested dictionaries, shallow keys first."""
    nested = {}
    for key, value in sorted(flat_dict.items(), key=lambda item: item[0].count(".")):
        update_nested_dict_from_flat(nested, key, value)
    return nested


def _join(base: str, name: str) -> str:
    return name if not base else f"{base}.{name}"


def build_config(config_cls: Type[ConfigBase], nested: Dict[str, Any], text: Optional[ScenarioText] = None,
                 path: str = "") -> ConfigBase:
    """Build ``config_cls`` (or the subclass named by ``_config_name``) from a nested dict.

    Every failure is reported as a :class:`ScenarioError` naming the dotted
    field and, when ``text`` is given, its line.
    """
    text = ScenarioText() if text is None else text
    logger.debug(f"Building {config_cls.__name__} at '{path}' from {nested}")
    try:
        actual_cls = config_cls._get_subclass_by_name(nested.get("_config_name"))
    except ValueError as e:
        name_path = _join(path, "_config_name")
        raise ScenarioError(path or config_cls.__name__, str(e), text.line_of(name_path)) from None

    type_hints = {k: v for k, v in field_types(actual_cls).items() if not k.startswith("_")}
    unknown = [key for key in nested if key != "_config_name" and key not in type_hints]
    if unknown:
        full = _join(path, unknown[0])
        raise ScenarioError(full, f"not a field of {actual_cls.__name__}; valid fields are {sorted(type_hints)}",
                            text.line_of(full))

    defaults = {}
    for base in reversed(actual_cls.__mro__):
        defaults.update({k: v for k, v in vars(base).items() if k in type_hints})

    init_values = {}
    for name, field_type in type_hints.items():
        full = _join(path, name)
        default = defaults.get(name, MISSING)
        if name not in nested:
            if default is MISSING:
                raise ScenarioError(full, f"missing required field of {actual_cls.__name__}", text.line_of(path))
            init_values[name] = copy.deepcopy(default)
            continue

        raw = nested[name]
        if is_config_type(field_type):
            member = config_member(field_type)
            if isinstance(raw, str) and raw.strip().lower() in ("null", "none", ""):
                if member is field_type:
                    raise ScenarioError(full, "this section is required", text.line_of(full))
                init_values[name] = None
                continue
            if isinstance(raw, str):
                raw = {"_config_name": raw}
            elif not isinstance(raw, dict):
                raise ScenarioError(full, f"expected a section name or nested keys, got {raw!r}", text.line_of(full))
            if "_config_name" not in raw and isinstance(default, member):
                raw = {"_config_name": default._config_name, **raw}
            init_values[name] = build_config(member, raw, text, path=full)
        else:
            try:
                init_values[name] = parse_value_to_type(raw, field_type, path=full)
            except TypeError as e:
                raise ScenarioError(full, f"invalid value {raw!r} ({str(e).splitlines()[0]})",
                                    text.line_of(full)) from None

    instance = actual_cls.__new__(actual_cls)
    for name, value in init_values.items():
        setattr(instance, name, value)
    return instance


def dump_scenario(config: ConfigBase) -> str:
    """Canonical text form: one line per leaf, category selections as ``_config_name`` lines.

    Reading the output back builds an equal configuration.
    """
    lines = []
    for key, value in config.to_dict(flatten=True).items():
        if key.endswith("._config_name"):
            lines.append(f"{key} = {value}")
        else:
            lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def load_scenario_text(text: str, config_cls: Type[ConfigBase], overrides: Optional[Dict[str, Any]] = None,
                       source: str = "<string>") -> Tuple[ConfigBase, ScenarioText]:
    """Build ``config_cls`` from scenario text; also returns the parsed lines."""
    parsed = parse_scenario_text(text, source=source)
    if overrides:
        parsed.update(overrides)
    return build_config(config_cls, flat_dict_to_nested(parsed.values), parsed), parsed


def load_scenario_file(path: Union[str, Path], config_cls: Type[ConfigBase],
                       overrides: Optional[Dict[str, Any]] = None) -> Tuple[ConfigBase, ScenarioText]:
    """Read, override and build a scenario file.

    Raises
    ------
    ScenarioError
        If the file cannot be read or any field is invalid.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError("config", f"cannot read scenario file {str(path)!r}: {e.strerror}") from None
    return load_scenario_text(text, config_cls, overrides, source=str(path))
