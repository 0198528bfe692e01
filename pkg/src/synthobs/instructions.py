"""Templated language instructions and the slot grammar.

Two templates cover the task families:

    block-in-bowl:  "pick the <color> block in a <color> bowl"
    pack-object:    "pick the <category> in a brown box"
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class InstructionError(ValueError):
    pass


BLOCK_IN_BOWL = "block-in-bowl"
PACK_OBJECT = "pack-object"

_BIB_RE = re.compile(r"^pick the (.+) block in a (.+) bowl$")
_PACK_SUFFIX = " in a brown box"
_PACK_PREFIX = "pick the "


@dataclass(frozen=True)
class Descriptor:
    """What an instruction slot refers to: optional color + category token."""

    category: str
    color: str | None = None

    def query_text(self) -> str:
        if self.color is None:
            return self.category
        return f"{self.color} {self.category}"


@dataclass(frozen=True)
class Instruction:
    template: str
    pick_slot: str
    place_slot: str

    @property
    def raw(self) -> str:
        return render(self.template, self.pick_slot, self.place_slot)

    @property
    def pick(self) -> Descriptor:
        if self.template == BLOCK_IN_BOWL:
            return Descriptor(category="block", color=self.pick_slot)
        return Descriptor(category=self.pick_slot)

    @property
    def place(self) -> Descriptor:
        if self.template == BLOCK_IN_BOWL:
            return Descriptor(category="bowl", color=self.place_slot)
        return Descriptor(category="box", color="brown")


def render(template: str, pick_slot: str, place_slot: str) -> str:
    if template == BLOCK_IN_BOWL:
        return f"pick the {pick_slot} block in a {place_slot} bowl"
    if template == PACK_OBJECT:
        return f"pick the {pick_slot}{_PACK_SUFFIX}"
    raise InstructionError(f"unknown template: {template!r}")


def parse_instruction(raw: str) -> Instruction:
    m = _BIB_RE.match(raw)
    if m:
        return Instruction(BLOCK_IN_BOWL, m.group(1), m.group(2))
    if raw.startswith(_PACK_PREFIX) and raw.endswith(_PACK_SUFFIX):
        slot = raw[len(_PACK_PREFIX) : -len(_PACK_SUFFIX)]
        if slot:
            return Instruction(PACK_OBJECT, slot, "brown box")
    raise InstructionError(f"unparseable instruction: {raw!r}")


def rewrite_instruction(instr: Instruction, slot: str, replacement: str) -> Instruction:
    """Replace one slot and re-render. `slot` is "pick" or "place"."""
    if slot == "pick":
        return Instruction(instr.template, replacement, instr.place_slot)
    if slot == "place":
        if instr.template == PACK_OBJECT:
            raise InstructionError("pack-object place slot is fixed")
        return Instruction(instr.template, instr.pick_slot, replacement)
    raise InstructionError(f"slot must be 'pick' or 'place', got {slot!r}")
