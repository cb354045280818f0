#!/usr/bin/env python3
"""Writes the synthetic API corpus under data/corpus/: 24 OpenAPI documents
with verbose, real-world style bloat and 100 labeled search queries. Each app
uses its own domain nouns, so vocabularies do not overlap across apps."""

import argparse
import json
import random
from pathlib import Path

DOMAINS = {
    "payments": ["transfer", "payee", "refund"],
    "groceries": ["basket", "produce", "voucher"],
    "music": ["playlist", "track", "album"],
    "calendar": ["meeting", "attendee", "reminder"],
    "fitness": ["workout", "exercise", "trainer"],
    "travel": ["flight", "itinerary", "passport"],
    "library": ["book", "loan", "shelf"],
    "recipes": ["recipe", "ingredient", "dish"],
    "weather": ["forecast", "station", "storm"],
    "garden": ["plant", "seedling", "irrigation"],
    "pets": ["pet", "vaccination", "kennel"],
    "hr": ["employee", "payslip", "vacation"],
    "school": ["course", "student", "grade"],
    "hotel": ["room", "reservation", "guest"],
    "movies": ["movie", "screening", "ticket"],
    "cars": ["vehicle", "garage", "mileage"],
    "realestate": ["property", "lease", "tenant"],
    "podcasts": ["episode", "podcast", "subscriber"],
    "chess": ["match", "opponent", "rating"],
    "photos": ["photo", "gallery", "caption"],
    "bank": ["account", "mortgage", "statement"],
    "parking": ["spot", "permit", "meter"],
    "dentist": ["appointment", "tooth", "hygienist"],
    "shipping": ["parcel", "courier", "label"],
}

# (operation, entity index)
OPS = [("list", 0), ("get", 0), ("create", 0), ("update", 0), ("delete", 0),
       ("list", 1), ("get", 1), ("create", 1), ("list", 2), ("archive", 2)]

SUMMARY = {
    "list": "Browse all {e}s",
    "get": "Show the details of one {e}",
    "create": "Add a new {e}",
    "update": "Change an existing {e}",
    "delete": "Remove a {e} permanently",
    "archive": "Archive an old {e}",
}

QUERY = {
    "list": ["browse every {e} I have", "I would like to browse all {e}s", "browse the {e}s"],
    "get": ["show me the details of {e} 42", "details for a single {e}", "show one {e} in detail"],
    "create": ["please add a new {e}", "add {e} for tomorrow", "I need to add another {e}"],
    "update": ["change my {e}", "change the existing {e} to fix a typo", "I want to change a {e}"],
    "delete": ["remove this {e} permanently", "remove my {e}", "permanently remove the old {e}"],
    "archive": ["archive the {e}", "please archive an old {e}", "archive that {e} from last year"],
}

BOILERPLATE = (
    "This endpoint is part of the public platform interface. Requests are rate limited per tenant and "
    "every call is recorded in the audit trail. Clients should retry idempotent requests with exponential "
    "backoff when the service answers with a transient error. See the platform guide for pagination, "
    "error envelopes and the deprecation policy. Fields marked as internal may change without notice."
)


def entity_schema(e, rng):
    props = {
        "id": {"type": "string", "description": f"Stable identifier of the {e}, assigned by the server.",
               "example": f"{e[:3]}_0001"},
        "name": {"type": "string", "description": f"Human readable name of the {e} shown in listings.",
                 "example": f"My {e}"},
        "created_at": {"type": "string", "format": "date-time", "description": "Creation time in RFC 3339 format."},
        "updated_at": {"type": "string", "format": "date-time", "description": "Time of the last modification."},
        "status": {"type": "string", "enum": ["active", "archived", "draft"],
                   "description": f"Lifecycle state of the {e}. Archived records are read-only."},
        "owner": {"type": "string", "description": "Identifier of the principal that owns the record."},
        "tags": {"type": "array", "items": {"type": "string"}, "description": "Free-form labels for filtering."},
        "metadata": {"type": "object", "description": "Bookkeeping fields maintained by the platform.",
                     "properties": {
                         "etag": {"type": "string", "description": "Opaque version tag for optimistic locking."},
                         "revision": {"type": "integer", "description": "Monotonic revision counter."},
                         "region": {"type": "string", "description": "Data residency region of the record."},
                         "source": {"type": "string", "description": "Channel through which the record was created."},
                     }},
    }
    for i in range(rng.randint(2, 4)):
        props[f"attribute_{i}"] = {"type": rng.choice(["string", "integer", "number", "boolean"]),
                                   "description": f"Domain specific attribute {i} of the {e}; see the product documentation."}
    return {"type": "object", "description": f"A {e} resource.", "properties": props}


def common_headers():
    return [
        {"name": "X-Request-ID", "in": "header", "required": False, "schema": {"type": "string"},
         "description": "Client supplied correlation identifier echoed in the response headers and audit log."},
        {"name": "X-Tenant", "in": "header", "required": False, "schema": {"type": "string"},
         "description": "Tenant override for multi-tenant service accounts; ignored for end-user tokens."},
    ]


def error_responses():
    return {
        "400": {"$ref": "#/components/responses/BadRequest"},
        "404": {"$ref": "#/components/responses/NotFound"},
        "429": {"description": "Too many requests. Retry after the number of seconds in the Retry-After header."},
    }


def build_app(app, entities, rng):
    E = [e.capitalize() for e in entities]
    components = {
        "schemas": {E[i]: entity_schema(e, rng) for i, e in enumerate(entities)},
        "responses": {
            "BadRequest": {"description": "The request was malformed.", "content": {"application/json": {"schema": {
                "type": "object", "properties": {"code": {"type": "string"}, "message": {"type": "string"},
                                                 "details": {"type": "array", "items": {"type": "string"}}}}}}},
            "NotFound": {"description": "The resource does not exist or is not visible to the caller."},
        },
    }
    for i, e in enumerate(entities):
        components["schemas"][E[i] + "Input"] = {
            "type": "object", "required": ["name"],
            "properties": {
                "name": {"type": "string", "description": f"Name of the {e}. Must be unique within the workspace."},
                "notes": {"type": "string", "description": "Optional remarks stored alongside the record."},
                "priority": {"type": "integer", "description": "Ordering hint between 1 and 5."},
            }}
    paths = {}
    for op, idx in OPS:
        e = entities[idx]
        ref = {"$ref": f"#/components/schemas/{E[idx]}"}
        coll = f"/{e}s"
        item = f"/{e}s/{{{e}_id}}"
        id_param = {"name": f"{e}_id", "in": "path", "required": True, "schema": {"type": "string"},
                    "description": f"Identifier of the {e}, as returned by the list and create operations."}
        body = {"required": True, "content": {"application/json": {"schema": {"$ref": f"#/components/schemas/{E[idx]}Input"}}}}
        entry = {
            "operationId": f"{op}_{e}s" if op == "list" else f"{op}_{e}",
            "summary": SUMMARY[op].format(e=e),
            "description": f"{SUMMARY[op].format(e=e)}. {BOILERPLATE}",
            "tags": [app, e],
            "externalDocs": {"url": f"https://docs.example.com/{app}/{e}", "description": "Reference guide"},
            "parameters": list(common_headers()),
            "responses": {"200": {"description": "Success", "content": {"application/json": {"schema": ref}}}},
        }
        entry["responses"].update(error_responses())
        if op == "list":
            entry["parameters"] += [
                {"name": "limit", "in": "query", "schema": {"type": "integer"},
                 "description": "Maximum number of records per page; the server may return fewer."},
                {"name": "cursor", "in": "query", "schema": {"type": "string"},
                 "description": "Opaque pagination cursor taken from the previous page."},
            ]
            entry["responses"]["200"] = {"description": "A page of records", "content": {"application/json": {"schema": {
                "type": "object", "properties": {"items": {"type": "array", "items": ref},
                                                 "next_cursor": {"type": "string"}}}}}}
            paths.setdefault(coll, {})["get"] = entry
        elif op == "create":
            entry["requestBody"] = body
            paths.setdefault(coll, {})["post"] = entry
        else:
            entry["parameters"].append(id_param)
            if op == "get":
                paths.setdefault(item, {})["get"] = entry
            elif op == "update":
                entry["requestBody"] = body
                paths.setdefault(item, {})["put"] = entry
            elif op == "delete":
                entry["responses"]["200"] = {"description": "Deleted", "content": {"application/json": {"schema": {
                    "type": "object", "properties": {"deleted": {"type": "boolean"}}}}}}
                paths.setdefault(item, {})["delete"] = entry
            elif op == "archive":
                paths.setdefault(item + "/archive", {})["post"] = entry
    return {
        "openapi": "3.0.3",
        "info": {"title": app.capitalize(), "version": "2.4.1",
                 "description": f"{app.capitalize()} service managing {', '.join(entities)} records.",
                 "contact": {"name": "Platform team", "email": "platform@example.com"},
                 "license": {"name": "Proprietary"}},
        "servers": [{"url": f"https://api.example.com/{app}"}],
        "components": components,
        "paths": paths,
    }


def build_queries(rng):
    pool = []
    for app, entities in DOMAINS.items():
        for op, idx in OPS:
            e = entities[idx]
            key = f"{op}_{e}s" if op == "list" else f"{op}_{e}"
            pool.append((app, key, op, e))
    picks = rng.sample(pool, 100)
    out = []
    for app, key, op, e in picks:
        out.append({"query": rng.choice(QUERY[op]).format(e=e), "expected": f"{app}.{key}"})
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "corpus"))
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    out = Path(args.out)
    rng = random.Random(args.seed)
    (out / "apps").mkdir(parents=True, exist_ok=True)
    for app, entities in DOMAINS.items():
        (out / "apps" / f"{app}.json").write_text(json.dumps(build_app(app, entities, rng), indent=1) + "\n")
    (out / "queries.json").write_text(json.dumps({"queries": build_queries(rng)}, indent=1) + "\n")


if __name__ == "__main__":
    main()
