"""Simple-font decoding: base encodings, /Differences, ToUnicode maps and widths."""

from __future__ import annotations

import re
import unicodedata

from . import _afm
from .errors import UnsupportedFeature
from .pdfsyntax import Document, Lexer, Name, Stream, decode_stream

_STANDARD_HIGH = {
    0xA1: "¡", 0xA2: "¢", 0xA3: "£", 0xA4: "⁄", 0xA5: "¥", 0xA6: "ƒ", 0xA7: "§", 0xA8: "¤",
    0xA9: "'", 0xAA: "“", 0xAB: "«", 0xAC: "‹", 0xAD: "›", 0xAE: "ﬁ", 0xAF: "ﬂ", 0xB1: "–",
    0xB2: "†", 0xB3: "‡", 0xB4: "·", 0xB6: "¶", 0xB7: "•", 0xB8: "‚", 0xB9: "„", 0xBA: "”",
    0xBB: "»", 0xBC: "…", 0xBD: "‰", 0xBF: "¿", 0xC1: "`", 0xC2: "´", 0xC3: "ˆ", 0xC4: "˜",
    0xC5: "¯", 0xC6: "˘", 0xC7: "˙", 0xC8: "¨", 0xCA: "˚", 0xCB: "¸", 0xCD: "˝", 0xCE: "˛",
    0xCF: "ˇ", 0xD0: "—", 0xE1: "Æ", 0xE3: "ª", 0xE8: "Ł", 0xE9: "Ø", 0xEA: "Œ", 0xEB: "º",
    0xF1: "æ", 0xF5: "ı", 0xF8: "ł", 0xF9: "ø", 0xFA: "œ", 0xFB: "ß",
}


def _codec_table(codec: str) -> list[str]:
    out = []
    for code in range(256):
        try:
            out.append(bytes([code]).decode(codec))
        except UnicodeDecodeError:
            out.append(chr(code))
    return out


def _standard_table() -> list[str]:
    out = [chr(c) if 32 <= c < 127 else "" for c in range(256)]
    out[0x27] = "’"
    out[0x60] = "‘"
    for code, ch in _STANDARD_HIGH.items():
        out[code] = ch
    for c in (9, 10, 13):
        out[c] = chr(c)
    return out


BASE_ENCODINGS = {
    "WinAnsiEncoding": _codec_table("cp1252"),
    "MacRomanEncoding": _codec_table("mac_roman"),
    "StandardEncoding": _standard_table(),
    "PDFDocEncoding": _codec_table("latin-1"),
}

_GLYPH_NAMES = {
    "space": " ", "exclam": "!", "quotedbl": '"', "numbersign": "#", "dollar": "$",
    "percent": "%", "ampersand": "&", "quotesingle": "'", "quoteright": "’", "quoteleft": "‘",
    "parenleft": "(", "parenright": ")", "asterisk": "*", "plus": "+", "comma": ",",
    "hyphen": "-", "period": ".", "slash": "/", "colon": ":", "semicolon": ";", "less": "<",
    "equal": "=", "greater": ">", "question": "?", "at": "@", "bracketleft": "[",
    "backslash": "\\", "bracketright": "]", "asciicircum": "^", "underscore": "_",
    "grave": "`", "braceleft": "{", "bar": "|", "braceright": "}", "asciitilde": "~",
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4", "five": "5", "six": "6",
    "seven": "7", "eight": "8", "nine": "9", "bullet": "•", "endash": "–", "emdash": "—",
    "quotedblleft": "“", "quotedblright": "”", "ellipsis": "…", "ff": "ﬀ", "fi": "ﬁ",
    "fl": "ﬂ", "ffi": "ﬃ", "ffl": "ﬄ", "degree": "°", "minus": "−", "nbspace": "\xa0",
}
_ACCENTS = {"acute": "́", "grave": "̀", "circumflex": "̂", "dieresis": "̈",
            "tilde": "̃", "ring": "̊", "cedilla": "̧", "caron": "̌"}


def glyph_to_unicode(name: str) -> str | None:
    if name in _GLYPH_NAMES:
        return _GLYPH_NAMES[name]
    if len(name) == 1 and name.isalpha():
        return name
    m = re.fullmatch(r"uni([0-9A-Fa-f]{4})+", name)
    if m:
        return "".join(chr(int(name[i:i + 4], 16)) for i in range(3, len(name), 4))
    m = re.fullmatch(r"u([0-9A-Fa-f]{4,6})", name)
    if m:
        return chr(int(m.group(1), 16))
    for accent, mark in _ACCENTS.items():
        if name.endswith(accent) and len(name) == len(accent) + 1:
            return unicodedata.normalize("NFC", name[0] + mark)
    return None


def _parse_tounicode(data: bytes) -> dict[int, str]:
    """bfchar/bfrange entries for one-byte codes."""
    out: dict[int, str] = {}

    def hexstr(tok: bytes) -> str:
        raw = bytes.fromhex(tok.decode("ascii"))
        return raw.decode("utf-16-be", "replace")

    for block in re.findall(rb"beginbfchar(.*?)endbfchar", data, re.S):
        for src, dst in re.findall(rb"<([0-9A-Fa-f]+)>\s*<([0-9A-Fa-f]*)>", block):
            out[int(src, 16)] = hexstr(dst)
    for block in re.findall(rb"beginbfrange(.*?)endbfrange", data, re.S):
        lex = Lexer(block)
        while not lex.at_end():
            try:
                lo, hi, dst = lex.next_object(False), lex.next_object(False), lex.next_object(False)
            except EOFError:
                break
            if not isinstance(lo, bytes) or not isinstance(hi, bytes):
                break
            lo_i, hi_i = int.from_bytes(lo, "big"), int.from_bytes(hi, "big")
            if isinstance(dst, list):
                for i, item in enumerate(dst):
                    out[lo_i + i] = item.decode("utf-16-be", "replace")
            elif isinstance(dst, bytes) and dst:
                base = int.from_bytes(dst, "big")
                for i in range(hi_i - lo_i + 1):
                    out[lo_i + i] = chr(base + i) if base + i < 0x110000 else "�"
    return out


def _standard_widths(base_font: str) -> dict[int, float]:
    bold = "Bold" in base_font
    if base_font.startswith("Courier"):
        return {c: 600.0 for c in range(256)}
    table = _afm.HELVETICA_BOLD if bold else _afm.HELVETICA
    return {c + _afm.FIRST_CODE: float(w) for c, w in enumerate(table)}


class SimpleFont:
    """One-byte font: code to text, code to advance width (1/1000 em)."""

    def __init__(self, doc: Document, font: dict):
        subtype = font.get("Subtype")
        if subtype in ("Type0", "Type3"):
            raise UnsupportedFeature(f"{subtype} fonts are not supported")
        self.base_font = str(font.get("BaseFont", ""))
        enc = doc.resolve(font.get("Encoding"))
        symbolic = any(s in self.base_font for s in ("Symbol", "Dingbats"))
        default = "PDFDocEncoding" if symbolic else (
            "StandardEncoding" if subtype == "Type1" else "WinAnsiEncoding")
        differences = []
        if isinstance(enc, dict):
            base = enc.get("BaseEncoding", default)
            differences = doc.resolve(enc.get("Differences")) or []
        else:
            base = enc if isinstance(enc, Name) else default
        if base not in BASE_ENCODINGS:
            raise UnsupportedFeature(f"encoding {base}")
        self.table = list(BASE_ENCODINGS[base])
        self.glyphs: dict[int, str] = {}
        code = 0
        for item in differences:
            if isinstance(item, int):
                code = item
            elif isinstance(item, Name):
                uni = glyph_to_unicode(str(item))
                if uni is not None and 0 <= code < 256:
                    self.table[code] = uni
                self.glyphs[code] = str(item)
                code += 1
        tounicode = doc.resolve(font.get("ToUnicode"))
        if isinstance(tounicode, Stream):
            for c, s in _parse_tounicode(decode_stream(tounicode, doc)).items():
                if 0 <= c < 256:
                    self.table[c] = s

        desc = doc.resolve(font.get("FontDescriptor")) or {}
        self.ascent = (desc.get("Ascent") or 718) / 1000
        self.descent = (desc.get("Descent") or -207) / 1000
        if self.descent > 0:
            self.descent = -self.descent
        missing = float(desc.get("MissingWidth", 0) or 0)
        widths = doc.resolve(font.get("Widths"))
        if isinstance(widths, list):
            first = int(font.get("FirstChar", 0))
            self.widths = {first + i: float(doc.resolve(w) or 0) for i, w in enumerate(widths)}
            self.default_width = missing or 500.0
        else:
            self.widths = _standard_widths(self.base_font)
            if "Bold" in self.base_font:
                lig = _afm.HELVETICA_BOLD_LIGATURES
            else:
                lig = _afm.HELVETICA_LIGATURES
            for c, g in self.glyphs.items():
                if g in lig:
                    self.widths[c] = float(lig[g])
            self.default_width = missing or 556.0

    def width(self, code: int) -> float:
        return self.widths.get(code, self.default_width)

    def decode(self, data: bytes) -> list[tuple[str, float, bool]]:
        """``(text, width, is_space)`` per glyph; UTF-16BE strings decode as Unicode."""
        if data.startswith(b"\xfe\xff"):
            text = data[2:].decode("utf-16-be", "replace")
            return [(ch, self.default_width if ch != " " else self.width(32), ch == " ") for ch in text]
        return [(self.table[b], self.width(b), b == 32) for b in data]
