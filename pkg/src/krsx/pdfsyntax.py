"""Minimal PDF object reader: lexer, xref resolution, stream filters, page tree.

Covers classic xref tables, xref streams with object streams, and the
Flate/ASCIIHex/ASCII85 filters. Anything outside that subset raises
``UnsupportedFeature`` instead of guessing.
"""

from __future__ import annotations

import base64
import re
import zlib
from dataclasses import dataclass

from .errors import EncryptedPdf, NotAPdf, UnsupportedFeature

WHITESPACE = b"\x00\t\n\x0c\r "
DELIMITERS = b"()<>[]{}/%"
_STOP = WHITESPACE + DELIMITERS
_NUMBER = re.compile(rb"[+-]?(?:\d+\.?\d*|\.\d+)")
_REF_TAIL = re.compile(rb"\s+(\d+)\s+R(?![^\x00\t\n\x0c\r ()<>\[\]{}/%])")


class Name(str):
    """A PDF name object (``/Foo`` is ``Name("Foo")``)."""


class Keyword(str):
    """A bare token: an operator in content streams, or obj/endobj/stream markers."""


@dataclass(frozen=True)
class Ref:
    num: int
    gen: int = 0


@dataclass
class Stream:
    dict: dict
    raw: bytes


class Lexer:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def skip_ws(self) -> None:
        data, n = self.data, len(self.data)
        pos = self.pos
        while pos < n:
            c = data[pos]
            if c in WHITESPACE:
                pos += 1
            elif c == 0x25:  # % comment
                while pos < n and data[pos] not in b"\r\n":
                    pos += 1
            else:
                break
        self.pos = pos

    def at_end(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.data)

    def next_object(self, allow_refs: bool = True):
        """Parse one object; bare words come back as ``Keyword``."""
        self.skip_ws()
        data = self.data
        if self.pos >= len(data):
            raise EOFError("unexpected end of data")
        c = data[self.pos:self.pos + 1]
        if c == b"/":
            return self._name()
        if c == b"(":
            return self._literal_string()
        if c == b"<":
            if data[self.pos + 1:self.pos + 2] == b"<":
                return self._dict(allow_refs)
            return self._hex_string()
        if c == b"[":
            self.pos += 1
            items = []
            while True:
                self.skip_ws()
                if self.pos >= len(data):
                    raise EOFError("unterminated array")
                if data[self.pos:self.pos + 1] == b"]":
                    self.pos += 1
                    return items
                items.append(self.next_object(allow_refs))
        if c in (b"]", b">", b"{", b"}", b")"):
            self.pos += 1
            return Keyword(c.decode())
        m = _NUMBER.match(data, self.pos)
        if m and (m.end() >= len(data) or data[m.end()] in _STOP):
            self.pos = m.end()
            tok = m.group()
            if b"." in tok:
                return float(tok)
            value = int(tok)
            if allow_refs and value >= 0:
                # "n g R" lookahead
                r = _REF_TAIL.match(data, self.pos)
                if r:
                    self.pos = r.end()
                    return Ref(value, int(r.group(1)))
            return value
        end = self.pos
        while end < len(data) and data[end] not in _STOP:
            end += 1
        if end == self.pos:
            end += 1
        word = data[self.pos:end].decode("latin-1")
        self.pos = end
        if word == "true":
            return True
        if word == "false":
            return False
        if word == "null":
            return None
        return Keyword(word)

    def _name(self) -> Name:
        data = self.data
        end = self.pos + 1
        while end < len(data) and data[end] not in _STOP:
            end += 1
        raw = data[self.pos + 1:end]
        self.pos = end
        raw = re.sub(rb"#([0-9A-Fa-f]{2})", lambda m: bytes([int(m.group(1), 16)]), raw)
        return Name(raw.decode("latin-1"))

    def _hex_string(self) -> bytes:
        end = self.data.find(b">", self.pos)
        if end < 0:
            raise EOFError("unterminated hex string")
        digits = re.sub(rb"\s+", b"", self.data[self.pos + 1:end])
        self.pos = end + 1
        if len(digits) % 2:
            digits += b"0"
        try:
            return bytes.fromhex(digits.decode("ascii"))
        except ValueError as exc:
            raise NotAPdf(f"bad hex string: {exc}") from exc

    _ESCAPES = {ord("n"): 10, ord("r"): 13, ord("t"): 9, ord("b"): 8, ord("f"): 12,
                ord("("): 40, ord(")"): 41, ord("\\"): 92}

    def _literal_string(self) -> bytes:
        data, n = self.data, len(self.data)
        pos = self.pos + 1
        depth = 1
        out = bytearray()
        while pos < n:
            c = data[pos]
            if c == 0x5C:  # backslash
                pos += 1
                if pos >= n:
                    break
                e = data[pos]
                if e in self._ESCAPES:
                    out.append(self._ESCAPES[e])
                    pos += 1
                elif 0x30 <= e <= 0x37:
                    j = pos
                    while j < n and j - pos < 3 and 0x30 <= data[j] <= 0x37:
                        j += 1
                    out.append(int(data[pos:j], 8) & 0xFF)
                    pos = j
                elif e == 0x0D:
                    pos += 2 if data[pos + 1:pos + 2] == b"\n" else 1
                elif e == 0x0A:
                    pos += 1
                else:
                    out.append(e)
                    pos += 1
                continue
            if c == 0x28:
                depth += 1
            elif c == 0x29:
                depth -= 1
                if depth == 0:
                    self.pos = pos + 1
                    return bytes(out)
            out.append(c)
            pos += 1
        raise EOFError("unterminated literal string")

    def _dict(self, allow_refs: bool) -> dict:
        self.pos += 2
        out = {}
        while True:
            self.skip_ws()
            if self.data[self.pos:self.pos + 2] == b">>":
                self.pos += 2
                return out
            key = self.next_object(allow_refs)
            if not isinstance(key, Name):
                raise NotAPdf(f"dictionary key is not a name: {key!r}")
            out[str(key)] = self.next_object(allow_refs)


# -- filters --------------------------------------------------------------------

def _png_unpredict(data: bytes, columns: int, colors: int = 1, bpc: int = 8) -> bytes:
    bpp = max(1, colors * bpc // 8)
    rowlen = (columns * colors * bpc + 7) // 8
    out = bytearray()
    prev = bytearray(rowlen)
    for start in range(0, len(data), rowlen + 1):
        ftype = data[start]
        row = bytearray(data[start + 1:start + 1 + rowlen])
        for i in range(len(row)):
            left = row[i - bpp] if i >= bpp else 0
            up = prev[i]
            upleft = prev[i - bpp] if i >= bpp else 0
            if ftype == 1:
                row[i] = (row[i] + left) & 0xFF
            elif ftype == 2:
                row[i] = (row[i] + up) & 0xFF
            elif ftype == 3:
                row[i] = (row[i] + (left + up) // 2) & 0xFF
            elif ftype == 4:
                p = left + up - upleft
                pa, pb, pc = abs(p - left), abs(p - up), abs(p - upleft)
                pred = left if pa <= pb and pa <= pc else (up if pb <= pc else upleft)
                row[i] = (row[i] + pred) & 0xFF
        out += row
        prev = row
    return bytes(out)


def _as_list(value) -> list:
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def decode_stream(stream: Stream, doc: Document | None = None) -> bytes:
    resolve = doc.resolve if doc else (lambda x: x)
    filters = [resolve(f) for f in _as_list(resolve(stream.dict.get("Filter")))]
    params = [resolve(p) for p in _as_list(resolve(stream.dict.get("DecodeParms")))]
    data = stream.raw
    for i, name in enumerate(filters):
        parm = params[i] if i < len(params) and isinstance(params[i], dict) else {}
        if name in ("FlateDecode", "Fl"):
            try:
                data = zlib.decompressobj().decompress(data)
            except zlib.error as exc:
                raise UnsupportedFeature(f"corrupt Flate stream: {exc}") from exc
            predictor = parm.get("Predictor", 1)
            if predictor >= 10:
                data = _png_unpredict(data, parm.get("Columns", 1), parm.get("Colors", 1),
                                      parm.get("BitsPerComponent", 8))
            elif predictor != 1:
                raise UnsupportedFeature(f"Flate predictor {predictor}")
        elif name in ("ASCIIHexDecode", "AHx"):
            digits = re.sub(rb"\s+", b"", data).rstrip(b">")
            if len(digits) % 2:
                digits += b"0"
            data = bytes.fromhex(digits.decode("ascii"))
        elif name in ("ASCII85Decode", "A85"):
            body = re.sub(rb"\s+", b"", data)
            if body.startswith(b"<~"):
                body = body[2:]
            if not body.endswith(b"~>"):
                body += b"~>"
            data = base64.a85decode(b"<~" + body, adobe=True)
        else:
            raise UnsupportedFeature(f"stream filter {name}")
    return data


# -- document -------------------------------------------------------------------

class Document:
    """Random-access view of a PDF file's objects."""

    def __init__(self, data: bytes):
        head = data[:1024]
        at = head.find(b"%PDF-")
        if at < 0:
            raise NotAPdf("missing %PDF- header")
        self.data = data
        self.version = head[at + 5:at + 8].decode("latin-1", "replace")
        self.offsets: dict[int, int] = {}
        self.in_objstm: dict[int, tuple[int, int]] = {}
        self.trailer: dict = {}
        self._cache: dict[int, object] = {}
        self._read_xref()
        if "Encrypt" in self.trailer:
            raise EncryptedPdf("document is encrypted")
        if "Root" not in self.trailer:
            raise NotAPdf("trailer has no /Root")

    # xref ---------------------------------------------------------------------

    def _read_xref(self) -> None:
        tail = self.data[-2048:]
        m = list(re.finditer(rb"startxref\s+(\d+)", tail))
        if not m:
            raise NotAPdf("missing startxref")
        offset = int(m[-1].group(1))
        seen = set()
        while offset is not None:
            if offset in seen or offset >= len(self.data):
                raise NotAPdf(f"bad xref offset {offset}")
            seen.add(offset)
            offset = self._read_xref_section(offset)

    def _read_xref_section(self, offset: int):
        lex = Lexer(self.data, offset)
        lex.skip_ws()
        if self.data.startswith(b"xref", lex.pos):
            lex.pos += 4
            while True:
                tok = lex.next_object(allow_refs=False)
                if tok == "trailer":
                    break
                if not isinstance(tok, int):
                    raise NotAPdf("malformed xref table")
                count = lex.next_object(allow_refs=False)
                if not isinstance(count, int):
                    raise NotAPdf("malformed xref subsection")
                lex.skip_ws()
                for i in range(count):
                    line = self.data[lex.pos:lex.pos + 20]
                    parts = line.split()
                    if len(parts) < 3:
                        raise NotAPdf("truncated xref entry")
                    if parts[2][:1] == b"n":
                        self.offsets.setdefault(tok + i, int(parts[0]))
                    lex.pos += 20
                    lex.skip_ws()
            trailer = lex.next_object()
            if not isinstance(trailer, dict):
                raise NotAPdf("malformed trailer")
            for k, v in trailer.items():
                self.trailer.setdefault(k, v)
            if "XRefStm" in trailer:
                self._read_xref_section(trailer["XRefStm"])
            return trailer.get("Prev")
        # cross-reference stream
        try:
            _, _, stream = self._parse_indirect(offset)
        except (EOFError, ValueError) as exc:
            raise NotAPdf(f"unreadable xref at {offset}") from exc
        if not isinstance(stream, Stream) or stream.dict.get("Type") != "XRef":
            raise NotAPdf(f"no xref at offset {offset}")
        d = stream.dict
        widths = d["W"]
        index = d.get("Index", [0, d["Size"]])
        raw = decode_stream(stream)
        rowlen = sum(widths)
        pos = 0
        for first, count in zip(index[::2], index[1::2]):
            for num in range(first, first + count):
                fields = []
                for w in widths:
                    fields.append(int.from_bytes(raw[pos:pos + w], "big") if w else None)
                    pos += w
                kind = 1 if fields[0] is None else fields[0]
                if kind == 1:
                    self.offsets.setdefault(num, fields[1])
                elif kind == 2:
                    self.in_objstm.setdefault(num, (fields[1], fields[2]))
            if pos > len(raw) + rowlen:
                raise NotAPdf("truncated xref stream")
        for k, v in d.items():
            if k not in ("Length", "Filter", "DecodeParms", "W", "Index", "Type"):
                self.trailer.setdefault(k, v)
        return d.get("Prev")

    # objects ----------------------------------------------------------------------

    def _parse_indirect(self, offset: int):
        lex = Lexer(self.data, offset)
        num = lex.next_object(allow_refs=False)
        gen = lex.next_object(allow_refs=False)
        kw = lex.next_object(allow_refs=False)
        if not (isinstance(num, int) and isinstance(gen, int) and kw == "obj"):
            raise ValueError(f"no object header at {offset}")
        obj = lex.next_object()
        lex.skip_ws()
        if isinstance(obj, dict) and self.data.startswith(b"stream", lex.pos):
            start = lex.pos + 6
            if self.data[start:start + 2] == b"\r\n":
                start += 2
            elif self.data[start:start + 1] in (b"\n", b"\r"):
                start += 1
            length = obj.get("Length")
            if isinstance(length, Ref):
                length = self.resolve(length)
            if not isinstance(length, int) or self.data[start + length:start + length + 30].find(b"endstream") < 0:
                end = self.data.find(b"endstream", start)
                if end < 0:
                    raise ValueError("unterminated stream")
                length = len(self.data[start:end].rstrip(b"\r\n"))
            obj = Stream(obj, self.data[start:start + length])
        return num, gen, obj

    def resolve(self, obj):
        """Follow references until a direct object is reached."""
        depth = 0
        while isinstance(obj, Ref):
            depth += 1
            if depth > 32:
                raise NotAPdf("reference cycle")
            obj = self._load(obj.num)
        return obj

    def _load(self, num: int):
        if num in self._cache:
            return self._cache[num]
        if num in self.offsets:
            try:
                _, _, obj = self._parse_indirect(self.offsets[num])
            except (EOFError, ValueError) as exc:
                raise NotAPdf(f"object {num} unreadable: {exc}") from exc
        elif num in self.in_objstm:
            obj = self._load_from_objstm(num, *self.in_objstm[num])
        else:
            obj = None
        self._cache[num] = obj
        return obj

    def _load_from_objstm(self, num: int, stm_num: int, index: int):
        stm = self.resolve(Ref(stm_num))
        if not isinstance(stm, Stream):
            raise NotAPdf(f"object stream {stm_num} missing")
        data = decode_stream(stm, self)
        n, first = stm.dict["N"], stm.dict["First"]
        lex = Lexer(data)
        pairs = [(lex.next_object(False), lex.next_object(False)) for _ in range(n)]
        for objnum, off in pairs:
            if objnum == num:
                return Lexer(data, first + off).next_object()
        return None

    # pages -------------------------------------------------------------------------

    def pages(self) -> list[dict]:
        """Leaf page dictionaries in order, with inheritable attributes copied down."""
        root = self.resolve(self.trailer["Root"])
        if not isinstance(root, dict):
            raise NotAPdf("catalog is not a dictionary")
        out: list[dict] = []
        self._walk(self.resolve(root.get("Pages")), {}, out, set())
        return out

    def _walk(self, node, inherited: dict, out: list, seen: set) -> None:
        if not isinstance(node, dict) or id(node) in seen:
            return
        seen.add(id(node))
        attrs = dict(inherited)
        for key in ("Resources", "MediaBox", "CropBox", "Rotate"):
            if key in node:
                attrs[key] = node[key]
        if node.get("Type") == "Pages" or "Kids" in node:
            for kid in self.resolve(node.get("Kids")) or []:
                self._walk(self.resolve(kid), attrs, out, seen)
        else:
            page = dict(attrs)
            page.update(node)
            out.append(page)


def iter_content(data: bytes):
    """Yield ``(operator, operands)`` from a content stream; inline images are skipped."""
    lex = Lexer(data)
    operands: list = []
    while True:
        try:
            if lex.at_end():
                break
            obj = lex.next_object(allow_refs=False)
        except EOFError:
            break
        if isinstance(obj, Keyword):
            if obj == "BI":
                m = re.compile(rb"[\x00\t\n\x0c\r ]EI(?=[\x00\t\n\x0c\r ]|$)").search(data, lex.pos)
                lex.pos = m.end() if m else len(data)
                operands = []
                continue
            yield str(obj), operands
            operands = []
        else:
            operands.append(obj)
