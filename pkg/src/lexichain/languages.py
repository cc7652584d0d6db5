"""Language registry: ISO 639-1 code, display name, and FLORES-200 code."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LanguageRegistryEntry:
    iso: str
    name: str
    flores_code: str


REGISTRY: tuple[LanguageRegistryEntry, ...] = (
    LanguageRegistryEntry("ca", "Catalan", "cat_Latn"),
    LanguageRegistryEntry("hr", "Croatian", "hrv_Latn"),
    LanguageRegistryEntry("da", "Danish", "dan_Latn"),
    LanguageRegistryEntry("nl", "Dutch", "nld_Latn"),
    LanguageRegistryEntry("tl", "Tagalog", "tgl_Latn"),
    LanguageRegistryEntry("id", "Indonesian", "ind_Latn"),
    LanguageRegistryEntry("it", "Italian", "ita_Latn"),
    LanguageRegistryEntry("ms", "Malay", "zsm_Latn"),
    LanguageRegistryEntry("nb", "Norwegian", "nob_Latn"),
    LanguageRegistryEntry("sk", "Slovak", "slk_Latn"),
    # Pivot languages for the evaluated pairs.
    LanguageRegistryEntry("en", "English", "eng_Latn"),
    LanguageRegistryEntry("de", "German", "deu_Latn"),
)

BY_ISO = {entry.iso: entry for entry in REGISTRY}
BY_FLORES = {entry.flores_code: entry for entry in REGISTRY}

# iso <-> flores must stay bijective within the registry
assert len(BY_ISO) == len(REGISTRY) and len(BY_FLORES) == len(REGISTRY)


def language_name(code: str) -> str:
    """Display name for an ISO or FLORES code; unknown codes pass through."""
    entry = BY_ISO.get(code) or BY_FLORES.get(code)
    return entry.name if entry else code


def flores_code(iso: str) -> str:
    entry = BY_ISO.get(iso)
    if entry is None:
        raise KeyError(f"unknown ISO 639-1 code {iso!r}")
    return entry.flores_code
