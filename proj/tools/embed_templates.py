#!/usr/bin/env python3
"""Regenerates include/glider/detail/embedded_templates.hpp from templates/*.txt."""
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
NAMES = ["judge", "gen_system", "gen_pointwise", "gen_pairwise", "verify", "highlight"]

out = [
    "// Generated by tools/embed_templates.py from templates/*.txt. Do not edit.",
    "#pragma once",
    "",
    "#include <string_view>",
    "",
    "namespace glider::detail {",
    "",
]
for name in NAMES:
    text = (ROOT / "templates" / f"{name}.txt").read_text(encoding="utf-8")
    assert ")glider\"" not in text
    out.append(f"inline constexpr std::string_view k_{name}_template = R\"glider({text})glider\";")
    out.append("")
out.append("}  // namespace glider::detail")
(ROOT / "include/glider/detail/embedded_templates.hpp").write_text("\n".join(out) + "\n", encoding="utf-8")
