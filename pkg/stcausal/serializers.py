"""
Reading and writing of the artifact documents.

The format of a file is picked from its extension, ``patterns/PM25@1001.json.xz`` is a
json document compressed with lzma. Writes go through a temporary file in the target
directory which replaces the target once complete.
"""
import abc
import io
import json
import os
import tempfile
from enum import Enum
from typing import IO, Any, Dict, Generic, Optional, Tuple, Type, TypeVar, Union

import numpy as np
import yaml
from pydantic import BaseModel

from stcausal.exceptions import UnsupportedFiletypeError

__all__ = [
    "Serializer",
    "DeSerializer",
    "Compressor",
    "register_serializer",
    "register_deserializer",
    "register_compressor",
    "serialize",
    "deserialize",
]


class DataType(str, Enum):
    """
    If a format is read and written as text or as bytes.
    """

    TEXT = "t"
    BYTES = "b"


class BaseSerializer(BaseModel):
    class Config:
        allow_mutation = False
        extra = "forbid"


class Compressor(BaseSerializer, abc.ABC):
    """
    Opens the file stream of one compression format.
    """

    @abc.abstractmethod
    def open_binary(self, file_name: str, writing: bool) -> IO[bytes]:
        raise NotImplementedError()

    def open(self, file_name: str, writing: bool, data_type: DataType) -> IO:
        stream = self.open_binary(file_name, writing)
        if data_type == DataType.BYTES:
            return stream
        return io.TextIOWrapper(stream, encoding="utf-8")


class NoneCompressor(Compressor):
    def open_binary(self, file_name: str, writing: bool) -> IO[bytes]:
        return open(file_name, "wb" if writing else "rb")


class LZMACompressor(Compressor):
    def open_binary(self, file_name: str, writing: bool) -> IO[bytes]:
        import lzma

        if writing:
            return lzma.open(file_name, "wb", preset=9)
        return lzma.open(file_name, "rb")


class GzipCompressor(Compressor):
    def open_binary(self, file_name: str, writing: bool) -> IO[bytes]:
        import gzip

        # mtime is pinned so that the same document always gives the same bytes
        if writing:
            return gzip.GzipFile(file_name, "wb", compresslevel=9, mtime=0)
        return gzip.GzipFile(file_name, "rb")


class BZ2Compressor(Compressor):
    def open_binary(self, file_name: str, writing: bool) -> IO[bytes]:
        import bz2

        if writing:
            return bz2.open(file_name, "wb", compresslevel=9)
        return bz2.open(file_name, "rb")


class Serializer(BaseSerializer, abc.ABC):
    data_type: DataType = DataType.TEXT

    @abc.abstractmethod
    def serialize(self, serializable: Any) -> Union[str, bytes]:
        """Render a document, a pydantic model or a plain dict, in this format."""
        raise NotImplementedError()


class DeSerializer(BaseSerializer, abc.ABC):
    data_type: DataType = DataType.TEXT

    @abc.abstractmethod
    def deserialize(self, file_object: IO) -> Dict:
        """Read the plain dict the artifact models are rebuilt from."""
        raise NotImplementedError()


def _plain(value):
    """The json default hook for numpy scalars and arrays."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _as_document(serializable: Any) -> Any:
    if isinstance(serializable, BaseModel):
        return json.loads(serializable.json())
    return serializable


class JsonSerializer(Serializer):
    def serialize(self, serializable: Any) -> str:
        return json.dumps(_as_document(serializable), indent=2, default=_plain)


class YamlSerializer(Serializer):
    def serialize(self, serializable: Any) -> str:
        # a json pass turns numpy values into plain python ones first
        document = json.loads(json.dumps(_as_document(serializable), default=_plain))
        return yaml.safe_dump(document)


class JsonDeSerializer(DeSerializer):
    def deserialize(self, file_object: IO) -> Dict:
        return json.load(file_object)


class YamlDeSerializer(DeSerializer):
    def deserialize(self, file_object: IO) -> Dict:
        return yaml.safe_load(file_object)


class FlatConfigDeSerializer(DeSerializer):
    """
    Reads flat ``key = value`` files where ``#`` starts a comment, values are parsed
    as yaml scalars or flow lists so ``0.1``, ``true`` and ``[3, 4]`` get their
    natural types.
    """

    def deserialize(self, file_object: IO) -> Dict:
        settings = {}
        for line_number, line in enumerate(file_object, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"line {line_number}: expected `key = value` but got `{line}`."
                )
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ValueError(f"line {line_number}: the key is empty.")
            settings[key] = yaml.safe_load(value) if value else None
        return settings


T = TypeVar("T", bound=BaseSerializer)


class _Registry(Generic[T]):
    """
    The classes registered for each file extension, extensions are case insensitive.
    """

    def __init__(self, kind: str):
        self.kind = kind
        self._classes: Dict[str, Type[T]] = {}

    def __contains__(self, extension: str) -> bool:
        return extension.lower() in self._classes

    def register(self, extension: str, cls: Type[T]) -> None:
        extension = extension.lower()
        if extension in self._classes:
            raise ValueError(f"{extension} already has a {self.kind} registered.")
        self._classes[extension] = cls

    def unregister(self, extension: str) -> None:
        if self._classes.pop(extension.lower(), None) is None:
            raise KeyError(f"The {self.kind} {extension} is not registered.")

    def get(self, extension: str) -> T:
        cls = self._classes.get(extension.lower())
        if cls is None:
            raise UnsupportedFiletypeError(
                f"The {self.kind} format {extension} is not supported; supported "
                f"formats are {sorted(self._classes)}."
            )
        return cls()


serializers: _Registry[Serializer] = _Registry("serializer")
deserializers: _Registry[DeSerializer] = _Registry("deserializer")
compressors: _Registry[Compressor] = _Registry("compressor")

register_serializer = serializers.register
unregister_serializer = serializers.unregister
get_serializer = serializers.get
register_deserializer = deserializers.register
unregister_deserializer = deserializers.unregister
get_deserializer = deserializers.get
register_compressor = compressors.register
unregister_compressor = compressors.unregister
get_compressor = compressors.get


def get_format_name(file_name: str) -> Tuple[str, str]:
    """
    Split the extensions of a file name into its format and compression, the
    compression is empty for an uncompressed file.
    """
    parts = os.path.basename(file_name).lower().split(".")
    if len(parts) > 2 and parts[-1] in compressors:
        return parts[-2], parts[-1]
    return parts[-1], ""


def serialize(
    serializable: Any, file_name: str, compression: Optional[str] = None
) -> str:
    """
    Write a document to file.

    Parameters:
        serializable: A pydantic model or a dict of plain and numpy values.
        file_name: The target, its extension picks the format.
        compression: A compression extension added to the file name, by default the
            one already in the file name if any.

    Returns:
        The name of the file which was written.
    """
    format_name, named_compression = get_format_name(file_name)
    if compression and compression != named_compression:
        file_name = f"{file_name}.{compression}"
    else:
        compression = named_compression
    serializer = get_serializer(format_name)
    compressor = get_compressor(compression)
    content = serializer.serialize(serializable)

    directory = os.path.dirname(os.path.abspath(file_name))
    os.makedirs(directory, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(
        dir=directory, prefix=".tmp-", suffix=os.path.basename(file_name)
    )
    os.close(handle)
    try:
        with compressor.open(temp_name, True, serializer.data_type) as output:
            output.write(content)
        os.chmod(temp_name, 0o644)
        os.replace(temp_name, file_name)
    finally:
        if os.path.exists(temp_name):
            os.remove(temp_name)
    return file_name


def deserialize(file_name: str) -> Dict:
    """
    Read a document written by ``serialize`` or a hand written config file.
    """
    format_name, compression = get_format_name(file_name)
    deserializer = get_deserializer(format_name)
    compressor = get_compressor(compression)
    if not os.path.exists(file_name):
        raise FileNotFoundError(f"The file {file_name} could not be found.")
    with compressor.open(file_name, False, deserializer.data_type) as stream:
        return deserializer.deserialize(stream)


for _extension, _serializer in [("json", JsonSerializer), ("yaml", YamlSerializer)]:
    register_serializer(_extension, _serializer)
register_serializer("yml", YamlSerializer)
for _extension, _deserializer in [
    ("json", JsonDeSerializer),
    ("yaml", YamlDeSerializer),
    ("yml", YamlDeSerializer),
    ("cfg", FlatConfigDeSerializer),
    ("conf", FlatConfigDeSerializer),
]:
    register_deserializer(_extension, _deserializer)
register_compressor("", NoneCompressor)
register_compressor("xz", LZMACompressor)
register_compressor("gz", GzipCompressor)
register_compressor("bz2", BZ2Compressor)
