import os

from .exceptions import ValidationError

__all__ = (
    "RunSettings",
    "Section",
    "Param",
    "csv_list",
)


def csv_list(value) -> list[str]:
    """
    Split a comma-separated string into a list of stripped, non-empty items.
    """
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(item).strip() for item in value if str(item).strip()]
    return [item.strip() for item in str(value).split(",") if item.strip()]


class Base:
    def __iter__(self):
        for key in self.__dict__:
            yield key, getattr(self, key)

    def __repr__(self):
        class_name = self.__class__.__name__
        repr_args = ", ".join([f"{k}={repr(v)}" for k, v in self])
        return f"{class_name}({repr_args})"


class Param(Base):
    def __init__(
        self,
        key: str,
        label: str,
        field=None,
        help_text: str = None,
        placeholder: str = None,
        required: bool = False,
        initial=None,
        choices=None,
        env: str = None,
        aliases: tuple = (),
    ):
        self.key = key
        self.label = label
        self.help_text = help_text
        self.required = required
        self.field = field or str
        self.initial = initial
        self.choices = choices
        self.env = env
        self.aliases = tuple(aliases)
        self.placeholder = placeholder or key.upper()

    @property
    def flag(self) -> str:
        return "--" + self.key.replace("_", "-")

    def clean(self, value):
        """
        Convert a raw value (flag, config file entry or environment variable) to the declared type.
        """
        if value is None:
            return None

        try:
            value = self.field(value)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"{self.label}: invalid value {value!r} ({e})")

        if self.choices:
            items = value if isinstance(value, list) else [value]
            unknown = [item for item in items if item not in self.choices]
            if unknown:
                raise ValidationError(f"{self.label}: {', '.join(map(str, unknown))} not in {list(self.choices)}")

        return value

    def from_env(self):
        if self.env and (raw := os.environ.get(self.env)):
            return self.clean(raw)
        return None


class Section(Base):
    def __init__(self, name: str | None, params: list[Param]):
        self.name = name
        self.params = params


class RunSettings(Base):
    def __init__(self, sections: list[Section]):
        self.sections = sections

    def params(self) -> list[Param]:
        return [param for section in self.sections for param in section.params]

    def get(self, key: str) -> Param:
        for param in self.params():
            if param.key == key:
                return param
        raise KeyError(key)

    def resolve(self, flags: dict, file_values: dict | None = None) -> dict:
        """
        Merge values by precedence: flags, then the config file, then environment variables, then defaults.
        """
        file_values = file_values or {}
        unknown = set(file_values) - {param.key for param in self.params()}
        if unknown:
            raise ValidationError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")

        resolved = {}
        for param in self.params():
            value = param.clean(flags.get(param.key))
            if value is None and param.key in file_values:
                value = param.clean(file_values[param.key])
            if value is None:
                value = param.from_env()
            if value is None:
                value = param.initial
            if value is None and param.required:
                raise ValidationError(f"{param.label} ({param.flag}) is required")
            resolved[param.key] = value

        return resolved
