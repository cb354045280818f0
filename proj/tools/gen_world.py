#!/usr/bin/env python3
"""Writes the simulated world (mock apps, sites, reasoner script) and the
812-task manifest under data/."""

import argparse
import json
import random
from pathlib import Path

USERS = ["alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy", "mallory", "oscar"]
DOMAINS = ["shopping", "shopping_admin", "gitlab", "reddit", "map"]
TEMPLATES_PER_DOMAIN = 36
TOTAL_TASKS = 812

ADMIN = "http://shop-admin.local"
POPUP = "http://popup.local"
LOCKED = "http://locked.local"

ORDER_COUNTS = {"pending": 3, "shipped": 5, "cancelled": 1}


def make_users(rng):
    users = {}
    next_id = 101
    for u in USERS:
        orders = []
        for _ in range(rng.randint(0, 5)):
            orders.append({"id": f"o{next_id}", "total": rng.randint(5, 120),
                           "status": rng.choice(["pending", "shipped", "delivered"])})
            next_id += 1
        users[u] = {"orders": orders, "balance": rng.randint(0, 900), "points": rng.randint(10, 5000)}
    return users


def shop_api(users):
    order_schema = {"type": "object", "properties": {
        "id": {"type": "string"}, "total": {"type": "integer"}, "status": {"type": "string"}}}
    user_param = {"name": "user_id", "in": "path", "required": True, "schema": {"type": "string"},
                  "description": "Identifier of the shop customer"}
    orders_by_order = {}
    for data in users.values():
        for o in data["orders"]:
            orders_by_order[o["id"]] = o
    return {
        "openapi": "3.0.3",
        "info": {"title": "Shop", "version": "1.0", "description": "Customer orders, balances and products"},
        "components": {"schemas": {"Order": order_schema}},
        "paths": {
            "/users/{user_id}/orders": {"get": {
                "operationId": "list_orders",
                "summary": "List the orders placed by a user",
                "parameters": [user_param],
                "responses": {"200": {"description": "orders", "content": {"application/json": {"schema": {
                    "type": "object", "properties": {"orders": {"type": "array", "items": {"$ref": "#/components/schemas/Order"}}}}}}}},
                "x-mock": {"by": "user_id", "cases": {u: {"orders": d["orders"]} for u, d in users.items()},
                           "default": {"orders": []}},
            }},
            "/orders/{order_id}": {"get": {
                "operationId": "get_order",
                "summary": "Get one order with its total",
                "parameters": [{"name": "order_id", "in": "path", "required": True, "schema": {"type": "string"}}],
                "responses": {"200": {"description": "order", "content": {"application/json": {"schema": {
                    "$ref": "#/components/schemas/Order"}}}}},
                "x-mock": {"by": "order_id", "cases": orders_by_order},
            }},
            "/users/{user_id}/balance": {"get": {
                "operationId": "get_balance",
                "summary": "Get the wallet balance of a user",
                "parameters": [user_param],
                "responses": {"200": {"description": "balance", "content": {"application/json": {"schema": {
                    "type": "object", "properties": {"user_id": {"type": "string"}, "balance": {"type": "integer"}}}}}}},
                "x-mock": {"by": "user_id", "cases": {u: {"user_id": u, "balance": d["balance"]} for u, d in users.items()}},
            }},
            "/users/{user_id}/points": {"get": {
                "operationId": "get_loyalty_points",
                "summary": "Get the loyalty points of a user",
                "parameters": [user_param],
                "responses": {"200": {"description": "points", "content": {"application/json": {"schema": {
                    "type": "object", "properties": {"points": {"type": "integer"}}}}}}},
                "x-mock": {"by": "user_id", "cases": {u: {"points": d["points"]} for u, d in users.items()}},
            }},
            "/products": {"get": {
                "operationId": "search_products",
                "summary": "Search the product catalog",
                "parameters": [{"name": "q", "in": "query", "required": True, "schema": {"type": "string"}}],
                "responses": {"200": {"description": "products", "content": {"application/json": {"schema": {
                    "type": "object", "properties": {"products": {"type": "array", "items": {"type": "object", "properties": {
                        "sku": {"type": "string"}, "name": {"type": "string"}}}}}}}}}},
            }},
        },
    }


def mail_api():
    return {
        "openapi": "3.0.3",
        "info": {"title": "Mail", "version": "1.0", "description": "Send and list email messages"},
        "paths": {
            "/messages": {
                "post": {
                    "operationId": "send_mail",
                    "summary": "Send an email message to a recipient",
                    "requestBody": {"required": True, "content": {"application/json": {"schema": {
                        "type": "object", "required": ["to", "subject", "body"],
                        "properties": {"to": {"type": "string"}, "subject": {"type": "string"}, "body": {"type": "string"}}}}}},
                    "responses": {"201": {"description": "sent", "content": {"application/json": {"schema": {
                        "type": "object", "properties": {"message_id": {"type": "string"}, "status": {"type": "string"}}}}}}},
                    "x-mock": {"status": 201, "response": {"message_id": "$digest", "status": "sent"}},
                },
                "get": {
                    "operationId": "list_messages",
                    "summary": "List sent email messages",
                    "responses": {"200": {"description": "messages", "content": {"application/json": {"schema": {
                        "type": "object", "properties": {"messages": {"type": "array", "items": {"type": "string"}}}}}}}},
                    "x-mock": {"response": {"messages": []}},
                },
            },
        },
    }


def link(i, name, href, y):
    return {"id": i, "role": "link", "name": name, "value": href, "bounds": [20, y, 160, 24]}


def shop_admin_site():
    nav = lambda y0: [link(1, "Orders", f"{ADMIN}/orders", y0), link(2, "Customers", f"{ADMIN}/customers", y0 + 30),
                      link(3, "Reports", f"{ADMIN}/reports", y0 + 60), link(4, "Settings", f"{ADMIN}/settings", y0 + 90),
                      link(5, "Help center", "http://help.example.org/", y0 + 120)]
    transitions = {"1": "orders", "2": "customers", "3": "reports", "4": "settings"}
    summary = "\n".join(f"{k.capitalize()} orders: {v}" for k, v in ORDER_COUNTS.items())
    pages = [
        {"id": "home", "url": f"{ADMIN}/home", "title": "Dashboard",
         "markdown": "# Dashboard\nWelcome back to the store admin.", "nodes": nav(100), "transitions": transitions},
        {"id": "orders", "url": f"{ADMIN}/orders", "title": "Orders",
         "markdown": f"# Orders\n{summary}\nLast sync: today", "nodes": nav(100) + [
             {"id": 20, "role": "textbox", "name": "Search orders", "bounds": [300, 60, 300, 30]}],
         "transitions": transitions},
        {"id": "customers", "url": f"{ADMIN}/customers", "title": "Customers",
         "markdown": f"# Customers\nRegistered customers: {len(USERS)}", "nodes": nav(100), "transitions": transitions},
        {"id": "reports", "url": f"{ADMIN}/reports", "title": "Reports",
         "markdown": "# Reports\nMonthly revenue report", "nodes": nav(100), "transitions": transitions},
        {"id": "settings", "url": f"{ADMIN}/settings", "title": "Settings",
         "markdown": "# Settings\nStore settings", "nodes": nav(100) + [
             {"id": 30, "role": "combobox", "name": "Currency", "bounds": [300, 100, 120, 30], "options": ["EUR", "USD"]}],
         "transitions": transitions},
    ]
    return {"site": "shop-admin", "origin": ADMIN, "entry": "home", "pages": pages}


def popup_site(site, origin, dismissable, title, button, details_md):
    overlay_nodes = [{"id": 90, "role": "dialog", "name": title, "bounds": [0, 0, 1280, 800]},
                     {"id": 91, "role": "button", "name": "Close", "parent": 90, "bounds": [1200, 20, 40, 40]}]
    return {"site": site, "origin": origin, "entry": "welcome", "pages": [
        {"id": "welcome", "url": f"{origin}/welcome", "title": "Welcome",
         "markdown": "# Welcome\nPress the button to continue.",
         "nodes": [{"id": 1, "role": "button", "name": button, "bounds": [560, 400, 160, 40]},
                   link(2, "Details", f"{origin}/details", 460)],
         "overlay": {"dismissable": dismissable, "nodes": overlay_nodes},
         "transitions": {"1": "details", "2": "details"}},
        {"id": "details", "url": f"{origin}/details", "title": "Details", "markdown": details_md,
         "nodes": [link(1, "Back to start", f"{origin}/welcome", 100)], "transitions": {"1": "welcome"}},
    ]}


def rule(agent, output, contains=(), excludes=(), cursor=None):
    r = {"agent": agent}
    if cursor is not None:
        r["cursor"] = cursor
    if contains:
        r["contains"] = list(contains)
    if excludes:
        r["excludes"] = list(excludes)
    r["output"] = output
    return r


def api(goal, consumes, produces, **extra):
    d = {"goal": goal, "executor": "api", "consumes": consumes, "produces": produces}
    d.update(extra)
    return d


def browser(goal, produces):
    return {"goal": goal, "executor": "browser", "consumes": [], "produces": produces}


# intent prefix -> (plan, final answer on success)
KINDS = {
    "count-and-mail": ("Count the orders of user", [
        api("Count the orders placed by the user", ["user_id"], ["order_count"]),
        api("Send an email to the user reporting the order count", ["email", "order_count"], ["message_id"]),
    ], "{{user_id}} has {{order_count}} orders; notification {{message_id}} sent"),
    "balance": ("What is the wallet balance of user", [
        api("Get the wallet balance of the user", ["user_id"], ["balance"]),
    ], "The balance of {{user_id}} is {{balance}}"),
    "browser-orders": ("In the store admin, how many orders are", None, "There are {{order_count}} matching orders"),
    "browser-popup": ("Open the welcome page and read the coupon code", [
        browser("Read the coupon code behind the welcome page", ["coupon"]),
    ], "Coupon code {{coupon}}"),
    "loop-totals": ("Add up the order totals of user", [
        api("List the order ids of the user", ["user_id"], ["order_ids"]),
        api("Get the total of one order", ["order_id"], ["order_total"], loop={"list": "order_ids", "alias": "order_id"}),
        api("Add up the order totals", ["order_total"], ["grand_total"]),
    ], "Grand total for {{user_id}}: {{grand_total}}"),
    "hard-fail": ("Verify the account on the locked portal", [
        browser("Press the Verify button on the portal", ["verified"]),
    ], "Account verified"),
    "wrong-answer": ("How many loyalty points does user", [
        api("Get the wallet balance of the user", ["user_id"], ["balance"]),
    ], "User {{user_id}} has {{balance}} loyalty points"),
}

PROGRAMS = {
    "Count the orders placed by the user":
        "call r = shop-api.list_orders(user_id: user_id)\nreturn {order_count: len(r.orders)}",
    "Send an email to the user reporting the order count":
        "call m = mail-api.send_mail(to: email, subject: \"Your orders\", body: str(order_count))\n"
        "return {message_id: m.message_id}",
    "Get the wallet balance of the user":
        "call b = shop-api.get_balance(user_id: user_id)\nreturn {balance: b.balance}",
    "List the order ids of the user":
        "call r = shop-api.list_orders(user_id: user_id)\nreturn {order_ids: map(r.orders, item.id)}",
    "Get the total of one order":
        "call o = shop-api.get_order(order_id: order_id)\nreturn {order_total: o.total}",
    "Add up the order totals":
        "return {grand_total: sum(order_total)}",
}


def build_script():
    rules = []
    rules.append(rule("context", {"quality": "clear"}))
    for kind, (prefix, plan, answer) in KINDS.items():
        if plan is not None:
            rules.append(rule("plan_controller", {"subtasks": plan}, contains=["## intent\n" + prefix], cursor=0))
    for status in ORDER_COUNTS:
        rules.append(rule("plan_controller", {"subtasks": [browser(f"Read the number of {status} orders", ["order_count"])]},
                          contains=[f"## intent\n{KINDS['browser-orders'][0]} {status}"], cursor=0))
    for kind, (prefix, _, answer) in KINDS.items():
        rules.append(rule("plan_controller", {"verdict": "complete", "final_answer": answer},
                          contains=["## intent\n" + prefix, "outcome: success"]))
    rules.append(rule("plan_controller", {"verdict": "abort", "reason": "a sub-task failed and no alternative exists"},
                      contains=["outcome: failure"]))
    rules.append(rule("shortlister", {"tool_ids": []}))
    for goal, program in PROGRAMS.items():
        rules.append(rule("code_agent", {"program": program}, contains=["goal: " + goal + "\n"]))
    rules.append(rule("api_planner", {"revision": "give_up", "reason": "no recovery available"}))

    rules.append(rule("browser_planner", {"decision": "finish", "success": False, "answer": "stopped after review"},
                      contains=["## hint"]))
    rules.append(rule("browser_planner", {"decision": "finish", "success": True}, contains=["## memory", "answer: "]))
    for status in ORDER_COUNTS:
        rules.append(rule("browser_planner", {"decision": "extract", "question": f"How many {status} orders are there?"},
                          contains=[f"url: {ADMIN}/orders\n", f"goal: Read the number of {status} orders"]))
    rules.append(rule("browser_planner", {"decision": "act", "instruction": "click the Orders link"},
                      contains=["url: " + ADMIN + "/"], excludes=[f"url: {ADMIN}/orders\n"]))
    rules.append(rule("browser_planner", {"decision": "extract", "question": "What is the coupon code?"},
                      contains=[f"url: {POPUP}/details\n"]))
    rules.append(rule("browser_planner", {"decision": "act", "instruction": "click the Continue button"},
                      contains=[f"url: {POPUP}/welcome\n"]))
    rules.append(rule("browser_planner", {"decision": "act", "instruction": "click the Verify button"},
                      contains=[f"url: {LOCKED}/welcome\n"]))
    rules.append(rule("judge", {"verdict": "revise", "hint": "the dialog cannot be dismissed, stop here"}))
    for status, n in ORDER_COUNTS.items():
        rules.append(rule("extraction_agent", {"found": True, "answer": str(n),
                                               "citations": [f"{status.capitalize()} orders: {n}"]},
                          contains=[f"How many {status} orders"]))
    rules.append(rule("extraction_agent", {"found": True, "answer": "SAVE20", "citations": ["Your coupon code is SAVE20"]},
                      contains=["What is the coupon code?"]))
    rules.append(rule("extraction_agent", {"found": False}))
    return {"rules": rules}


def task_for(kind, rng, users, task_id, template_id, domain):
    user = rng.choice(USERS)
    data = users[user]
    ctx = {"user_id": user, "email": f"{user}@example.com"}
    if kind == "count-and-mail":
        return dict(intent=f"Count the orders of user {user} and email the count to {user}@example.com",
                    apps=["shop-api", "mail-api"], context=ctx, expected=f"{user} has {len(data['orders'])} orders")
    if kind == "balance":
        return dict(intent=f"What is the wallet balance of user {user}?", apps=["shop-api"], context={"user_id": user},
                    expected=f"The balance of {user} is {data['balance']}")
    if kind == "browser-orders":
        status = rng.choice(sorted(ORDER_COUNTS))
        return dict(intent=f"In the store admin, how many orders are {status}?", apps=["shop-admin"], context={},
                    expected=f"There are {ORDER_COUNTS[status]} matching orders")
    if kind == "browser-popup":
        return dict(intent="Open the welcome page and read the coupon code", apps=["popup-demo"], context={},
                    expected="Coupon code SAVE20")
    if kind == "loop-totals":
        total = sum(o["total"] for o in data["orders"])
        return dict(intent=f"Add up the order totals of user {user}", apps=["shop-api"], context={"user_id": user},
                    expected=f"Grand total for {user}: {total}")
    if kind == "hard-fail":
        return dict(intent="Verify the account on the locked portal", apps=["popup-locked"], context={},
                    expected="Account verified")
    if kind == "wrong-answer":
        return dict(intent=f"How many loyalty points does user {user} have?", apps=["shop-api"],
                    context={"user_id": user}, expected=f"User {user} has {data['points']} loyalty points")
    raise ValueError(kind)


KIND_CYCLE = ["count-and-mail", "balance", "browser-orders", "loop-totals", "browser-popup", "count-and-mail",
              "wrong-answer", "balance", "hard-fail", "browser-orders"]


def build_manifest(users, rng):
    templates = []
    for d, domain in enumerate(DOMAINS):
        for t in range(TEMPLATES_PER_DOMAIN):
            templates.append((domain, f"{domain}-t{t:02d}", KIND_CYCLE[(d * 7 + t) % len(KIND_CYCLE)]))
    # 812 = 180 * 4 + 92: the first 92 templates get a fifth instance
    counts = [4] * len(templates)
    for i in rng.sample(range(len(templates)), TOTAL_TASKS - 4 * len(templates)):
        counts[i] = 5
    tasks = []
    for (domain, template_id, kind), n in zip(templates, counts):
        for j in range(n):
            task_id = f"{template_id}-{j}"
            spec = task_for(kind, rng, users, task_id, template_id, domain)
            tasks.append({"id": task_id, "template_id": template_id, "domain": domain, "kind": kind,
                          "intent": spec["intent"], "apps_in_scope": spec["apps"],
                          "initial_context": spec["context"], "expected": spec["expected"]})
    return {"name": "web-812", "tasks": tasks}


def write(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out = Path(args.out)
    rng = random.Random(args.seed)
    users = make_users(rng)

    world = out / "world"
    write(world / "apps" / "shop-api.json", shop_api(users))
    write(world / "apps" / "mail-api.json", mail_api())
    write(world / "sites" / "shop-admin.json", shop_admin_site())
    write(world / "sites" / "popup-demo.json", popup_site(
        "popup-demo", POPUP, True, "Subscribe to our newsletter", "Continue",
        "# Details\nThanks for visiting.\nYour coupon code is SAVE20"))
    write(world / "sites" / "popup-locked.json", popup_site(
        "popup-locked", LOCKED, False, "Verify your account", "Verify", "# Details\nAccount verified"))
    write(world / "script.json", build_script())

    alice = users["alice"]
    write(world / "scenario_task.json", {
        "id": "count-and-mail-alice",
        "intent": "Count the orders of user alice and email the count to alice@example.com",
        "apps_in_scope": ["shop-api", "mail-api"],
        "initial_context": {"user_id": "alice", "email": "alice@example.com"},
        "expected": f"alice has {len(alice['orders'])} orders"})
    write(out / "manifest" / "tasks_812.json", build_manifest(users, rng))


if __name__ == "__main__":
    main()
