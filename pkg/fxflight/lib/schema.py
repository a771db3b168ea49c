from typing import Any

import msgspec


class BaseStruct(msgspec.Struct):
    def to_dict(self) -> dict[str, Any]:
        return {f: getattr(self, f) for f in self.__struct_fields__ if getattr(self, f, None) != msgspec.UNSET}


class DocumentStruct(BaseStruct, forbid_unknown_fields=True, kw_only=True):
    """Versioned on-disk document."""

    schema_version: int = 1


def encode_document(doc: msgspec.Struct) -> bytes:
    """Pretty JSON with a trailing newline; identical inputs give identical bytes."""
    return msgspec.json.format(msgspec.json.encode(doc), indent=2) + b"\n"
