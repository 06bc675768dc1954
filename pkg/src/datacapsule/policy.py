"""XACML-subset access policies published by service providers.

Accepted grammar (see ``schemas/policy-subset.xsd``)::

    <Policy PolicyId="..." Version="...">
      <Description>free text</Description>?
      <Rule Effect="Permit" RuleId="..."?>
        <Condition>
          EXPR
        </Condition>
      </Rule>
    </Policy>

    EXPR := <Apply FunctionId="...and">EXPR+</Apply>
          | <Apply FunctionId="...or">EXPR+</Apply>
          | <AttributeDesignator AttributeId="..." Category? DataType? MustBePresent?/>

Elements may be unqualified or in an XACML 2.0/3.0 namespace. FunctionId
matches on its last ``:``-separated token, so full URNs such as
``urn:oasis:names:tc:xacml:1.0:function:and`` parse. n-ary Apply nodes fold
left-associatively into binary AND/OR.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import EmptyCondition, MalformedXml, UnsupportedElement
from .lsss import RESERVED_PREFIX, AccessFormula, And, Leaf, conjoin, disjoin

XACML_NAMESPACES = frozenset({
    "urn:oasis:names:tc:xacml:3.0:core:schema:wd-17",
    "urn:oasis:names:tc:xacml:2.0:policy:schema:os",
})

_ALLOWED_ATTRS = {
    "Policy": ({"PolicyId", "Version"}, set()),
    "Description": (set(), set()),
    "Rule": ({"Effect"}, {"RuleId"}),
    "Condition": (set(), set()),
    "Apply": ({"FunctionId"}, set()),
    "AttributeDesignator": ({"AttributeId"}, {"Category", "DataType", "MustBePresent"}),
}


@dataclass(frozen=True)
class PolicyDocument:
    policy_id: str
    version: str
    description: str
    condition: ET.Element
    raw: bytes

    @property
    def formula(self) -> AccessFormula:
        return to_formula(self)


def _local(el: ET.Element) -> str:
    tag = el.tag
    if not isinstance(tag, str):
        raise UnsupportedElement("comments and processing instructions are not supported")
    if tag.startswith("{"):
        ns, _, name = tag[1:].partition("}")
        if ns not in XACML_NAMESPACES:
            raise UnsupportedElement(f"element {name!r} in foreign namespace {ns!r}")
        return name
    return tag


def _check(el: ET.Element, name: str) -> None:
    local = _local(el)
    if local != name:
        raise UnsupportedElement(f"expected <{name}>, found <{local}>")
    required, optional = _ALLOWED_ATTRS[name]
    present = set(el.attrib)
    extra = present - required - optional
    if extra:
        raise UnsupportedElement(f"unsupported attribute(s) on <{name}>: {', '.join(sorted(extra))}")
    missing = required - present
    if missing:
        raise UnsupportedElement(f"<{name}> is missing {', '.join(sorted(missing))}")
    if el.tail and el.tail.strip():
        raise UnsupportedElement(f"stray text after <{name}>")
    if name != "Description" and el.text and el.text.strip():
        raise UnsupportedElement(f"unexpected text inside <{name}>")


def parse_policy(data: bytes) -> PolicyDocument:
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        data.decode("utf-8")
        if b"<!DOCTYPE" in data or b"<!ENTITY" in data:
            raise UnsupportedElement("DTDs and entity declarations are not supported")
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    except UnicodeDecodeError:
        raise MalformedXml("policy is not UTF-8") from None

    _check(root, "Policy")
    policy_id = root.attrib["PolicyId"]
    if not policy_id:
        raise UnsupportedElement("PolicyId must be nonempty")
    children = list(root)
    description = ""
    if children and _local(children[0]) == "Description":
        _check(children[0], "Description")
        if len(children[0]):
            raise UnsupportedElement("<Description> must contain text only")
        description = children[0].text or ""
        children = children[1:]
    if len(children) != 1:
        raise UnsupportedElement("<Policy> must contain exactly one <Rule>")
    rule = children[0]
    _check(rule, "Rule")
    if rule.attrib["Effect"] != "Permit":
        raise UnsupportedElement(f"only Effect=\"Permit\" rules are supported, got {rule.attrib['Effect']!r}")
    if len(rule) != 1:
        raise UnsupportedElement("<Rule> must contain exactly one <Condition>")
    condition = rule[0]
    _check(condition, "Condition")
    doc = PolicyDocument(policy_id, root.attrib["Version"], description, condition, bytes(data))
    to_formula(doc)
    return doc


def _function(el: ET.Element) -> str:
    token = el.attrib["FunctionId"].rsplit(":", 1)[-1].strip().lower()
    if token not in ("and", "or"):
        raise UnsupportedElement(f"unsupported FunctionId {el.attrib['FunctionId']!r}")
    return token


def _expr(el: ET.Element) -> AccessFormula:
    name = _local(el)
    if name == "AttributeDesignator":
        _check(el, name)
        if len(el):
            raise UnsupportedElement("<AttributeDesignator> must be empty")
        attr = el.attrib["AttributeId"]
        if not attr:
            raise UnsupportedElement("AttributeId must be nonempty")
        if attr.startswith(RESERVED_PREFIX):
            raise UnsupportedElement(f"attribute namespace {RESERVED_PREFIX!r} is reserved")
        return Leaf(attr)
    if name == "Apply":
        _check(el, name)
        fn = _function(el)
        args = [_expr(child) for child in el]
        if not args:
            raise EmptyCondition(f"<Apply FunctionId={el.attrib['FunctionId']!r}> has no arguments")
        return conjoin(*args) if fn == "and" else disjoin(*args)
    raise UnsupportedElement(f"unsupported element <{name}>")


def to_formula(doc: PolicyDocument) -> AccessFormula:
    children = list(doc.condition)
    if not children:
        raise EmptyCondition("<Condition> is empty")
    if len(children) > 1:
        raise UnsupportedElement("<Condition> must contain a single expression")
    return _expr(children[0])


_XML_ILLEGAL = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ufffe\uffff]")
_ATTR_ESCAPES = {'"': "&quot;", "\n": "&#10;", "\r": "&#13;", "\t": "&#9;"}


def _attr(value: str) -> str:
    if _XML_ILLEGAL.search(value):
        raise UnsupportedElement(f"value {value!r} contains characters XML cannot carry")
    return '"' + escape(value, _ATTR_ESCAPES) + '"'


def _text(value: str) -> str:
    if _XML_ILLEGAL.search(value):
        raise UnsupportedElement(f"value {value!r} contains characters XML cannot carry")
    return escape(value, {"\r": "&#13;"})


def _render_expr(f: AccessFormula, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    if isinstance(f, Leaf):
        out.append(f"{pad}<AttributeDesignator AttributeId={_attr(f.attribute)}/>")
        return
    fn = "and" if isinstance(f, And) else "or"
    out.append(f'{pad}<Apply FunctionId="{fn}">')
    _render_expr(f.left, depth + 1, out)
    _render_expr(f.right, depth + 1, out)
    out.append(f"{pad}</Apply>")


def render_policy(formula: AccessFormula, policy_id: str, version: str = "1.0",
                  description: str = "") -> bytes:
    """Canonical XML: fixed attribute order, 2-space indent, LF endings."""
    if not policy_id:
        raise UnsupportedElement("PolicyId must be nonempty")
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<Policy PolicyId={_attr(policy_id)} Version={_attr(version)}>",
    ]
    if description:
        out.append(f"  <Description>{_text(description)}</Description>")
    out.append('  <Rule RuleId="permit" Effect="Permit">')
    out.append("    <Condition>")
    _render_expr(formula, 3, out)
    out.append("    </Condition>")
    out.append("  </Rule>")
    out.append("</Policy>")
    return ("\n".join(out) + "\n").encode("utf-8")
