"""Bundled pilot exercise: a 25-task web-shop kata with a hidden feature suite.

``build_hidden_repo`` writes the hidden repository (manifest plus checker
script); ``build_workspace`` writes a student workspace with the first
``solved`` features implemented. The workspace ships with the seeded failing
heading test until ``heading_fixed`` is set.
"""

from __future__ import annotations

import json
import textwrap
from dataclasses import dataclass
from pathlib import Path

from .model import ExerciseManifest, parse_manifest

SURVEY_URL = "https://survey.example.org/profci-pilot"
DOC = "https://docs.python.org/3/library/"


@dataclass(frozen=True)
class PilotTask:
    id: str
    title: str
    given: str
    when: str
    then: str
    hints: tuple[str, ...]
    check: str
    solution: str
    student_test: str


def _t(id, title, given, when, then, hints, check, solution, student_test):
    return PilotTask(
        id, title, given, when, then, tuple(hints),
        textwrap.dedent(check).strip(), textwrap.dedent(solution).strip(), textwrap.dedent(student_test).strip(),
    )


TASKS: tuple[PilotTask, ...] = (
    _t("price-format", "Show prices in dollars",
       "a product price of 150 cents", "the price is formatted", "it reads \"$1.50\"",
       [DOC + "string.html#format-specification-mini-language"],
       "assert shop.format_price(150) == '$1.50', f'expected $1.50, got {shop.format_price(150)!r}'",
       """
       def format_price(cents):
           return f"${cents // 100}.{cents % 100:02d}"
       """,
       "self.assertEqual(shop.format_price(5), '$0.05')"),
    _t("slug", "Generate product slugs",
       "a product named \"Red Shirt\"", "its slug is generated", "the slug is \"red-shirt\"",
       [DOC + "stdtypes.html#str.split"],
       "assert shop.slugify('  Red   Shirt ') == 'red-shirt', shop.slugify('  Red   Shirt ')",
       """
       def slugify(name):
           return "-".join(name.lower().split())
       """,
       "self.assertEqual(shop.slugify('A B'), 'a-b')"),
    _t("product", "Create products",
       "a name and a price in cents", "a product is created", "it has a name, a slug and a price",
       [],
       "assert shop.make_product('Red Shirt', 1500) == {'name': 'Red Shirt', 'slug': 'red-shirt', 'price': 1500}",
       """
       def make_product(name, cents):
           return {"name": name, "slug": slugify(name), "price": cents}
       """,
       "self.assertEqual(shop.make_product('X', 1)['slug'], 'x')"),
    _t("label", "Label products with their price",
       "a product \"Mug\" costing 899 cents", "its label is rendered", "the label is \"Mug ($8.99)\"",
       [],
       "label = shop.product_label(shop.make_product('Mug', 899))\nassert label == 'Mug ($8.99)', label",
       """
       def product_label(product):
           return f"{product['name']} ({format_price(product['price'])})"
       """,
       "self.assertIn('$', shop.product_label(shop.make_product('A', 1)))"),
    _t("cart-new", "Start with an empty cart",
       "a visitor without a cart", "a cart is created", "it contains no items",
       [],
       "assert shop.new_cart() == {'items': {}}, shop.new_cart()",
       """
       def new_cart():
           return {"items": {}}
       """,
       "self.assertEqual(shop.new_cart()['items'], {})"),
    _t("cart-add", "Add products to the cart",
       "an empty cart", "a product is added twice", "the cart holds quantity 2 of it",
       ["Use the product slug as key: `cart['items'][slug]`"],
       """
       cart = shop.new_cart()
       mug = shop.make_product('Mug', 899)
       shop.add_to_cart(cart, mug)
       shop.add_to_cart(cart, mug)
       assert cart['items']['mug']['qty'] == 2, cart
       """,
       """
       def add_to_cart(cart, product, qty=1):
           entry = cart["items"].setdefault(product["slug"], {"product": product, "qty": 0})
           entry["qty"] += qty
           return cart
       """,
       "c = shop.new_cart(); shop.add_to_cart(c, shop.make_product('A', 1)); self.assertIn('a', c['items'])"),
    _t("cart-count", "Count cart items",
       "a cart with 2 mugs and 1 shirt", "the item count is shown", "it is 3",
       [],
       """
       cart = shop.new_cart()
       shop.add_to_cart(cart, shop.make_product('Mug', 899), 2)
       shop.add_to_cart(cart, shop.make_product('Shirt', 1500))
       assert shop.cart_count(cart) == 3, shop.cart_count(cart)
       """,
       """
       def cart_count(cart):
           return sum(entry["qty"] for entry in cart["items"].values())
       """,
       "self.assertEqual(shop.cart_count(shop.new_cart()), 0)"),
    _t("cart-total", "Sum up the cart",
       "a cart with 2 mugs at 899 cents", "the total is computed", "it is 1798 cents",
       [],
       """
       cart = shop.new_cart()
       shop.add_to_cart(cart, shop.make_product('Mug', 899), 2)
       assert shop.cart_total(cart) == 1798, shop.cart_total(cart)
       """,
       """
       def cart_total(cart):
           return sum(e["product"]["price"] * e["qty"] for e in cart["items"].values())
       """,
       "self.assertEqual(shop.cart_total(shop.new_cart()), 0)"),
    _t("cart-remove", "Remove products from the cart",
       "a cart containing a mug", "the mug is removed", "the cart is empty",
       [],
       """
       cart = shop.new_cart()
       shop.add_to_cart(cart, shop.make_product('Mug', 899))
       shop.remove_from_cart(cart, 'mug')
       assert cart['items'] == {}, cart
       """,
       """
       def remove_from_cart(cart, slug):
           cart["items"].pop(slug, None)
           return cart
       """,
       "c = shop.new_cart(); shop.remove_from_cart(c, 'x'); self.assertEqual(c['items'], {})"),
    _t("discount", "Apply percentage discounts",
       "a total of 1999 cents", "a 10% discount is applied", "the total becomes 1799 cents",
       ["Integer division rounds down: `//`"],
       "assert shop.apply_discount(1999, 10) == 1799, shop.apply_discount(1999, 10)",
       """
       def apply_discount(total, percent):
           return total * (100 - percent) // 100
       """,
       "self.assertEqual(shop.apply_discount(100, 0), 100)"),
    _t("coupon", "Validate coupon codes",
       "coupon codes of four capitals and two digits", "\"SAVE10\" and \"save10\" are checked",
       "only \"SAVE10\" is valid",
       [DOC + "re.html"],
       "assert shop.valid_coupon('SAVE10') and not shop.valid_coupon('save10') and not shop.valid_coupon('SAVE100')",
       """
       def valid_coupon(code):
           return re.fullmatch(r"[A-Z]{4}[0-9]{2}", code) is not None
       """,
       "self.assertFalse(shop.valid_coupon(''))"),
    _t("shipping", "Charge shipping below 50 dollars",
       "order totals of 4999 and 5000 cents", "shipping is computed", "it is 499 and 0 cents",
       [],
       "assert (shop.shipping_cost(4999), shop.shipping_cost(5000)) == (499, 0)",
       """
       def shipping_cost(total):
           return 0 if total >= 5000 else 499
       """,
       "self.assertEqual(shop.shipping_cost(10**6), 0)"),
    _t("tax", "Add sales tax",
       "a total of 1050 cents and a 19% rate", "tax is computed", "it is 200 cents, rounded half up",
       [],
       "assert shop.tax(1050, 19) == 200, shop.tax(1050, 19)",
       """
       def tax(total, rate_pct):
           return (total * rate_pct + 50) // 100
       """,
       "self.assertEqual(shop.tax(0, 19), 0)"),
    _t("order-total", "Show the order total",
       "a cart worth 1798 cents", "the order total is shown", "shipping is included: 2297 cents",
       [],
       """
       cart = shop.new_cart()
       shop.add_to_cart(cart, shop.make_product('Mug', 899), 2)
       assert shop.order_total(cart) == 2297, shop.order_total(cart)
       """,
       """
       def order_total(cart):
           total = cart_total(cart)
           return total + shipping_cost(total)
       """,
       "self.assertEqual(shop.order_total(shop.new_cart()), 499)"),
    _t("search", "Search the catalog",
       "products \"Red Shirt\" and \"Blue Mug\"", "a visitor searches for \"shirt\"",
       "only the red shirt is found",
       ["Compare lower-cased strings"],
       """
       items = [shop.make_product('Red Shirt', 1), shop.make_product('Blue Mug', 2)]
       found = [p['name'] for p in shop.search(items, 'shirt')]
       assert found == ['Red Shirt'], found
       """,
       """
       def search(products, query):
           q = query.lower()
           return [p for p in products if q in p["name"].lower()]
       """,
       "self.assertEqual(shop.search([], 'x'), [])"),
    _t("sort-price", "Sort products by price",
       "products costing 3, 1 and 2 cents", "the catalog is sorted by price", "they appear as 1, 2, 3",
       [DOC + "functions.html#sorted"],
       """
       items = [shop.make_product(n, c) for n, c in (('a', 3), ('b', 1), ('c', 2))]
       prices = [p['price'] for p in shop.sort_by_price(items)]
       assert prices == [1, 2, 3], prices
       """,
       """
       def sort_by_price(products):
           return sorted(products, key=lambda p: p["price"])
       """,
       "self.assertEqual(shop.sort_by_price([]), [])"),
    _t("paginate", "Paginate the catalog",
       "25 products and 10 per page", "page 3 is requested", "products 21 to 25 are shown",
       [],
       "assert shop.paginate(list(range(1, 26)), 3, 10) == [21, 22, 23, 24, 25]",
       """
       def paginate(items, page, per_page):
           start = (page - 1) * per_page
           return items[start:start + per_page]
       """,
       "self.assertEqual(shop.paginate([1, 2], 1, 1), [1])"),
    _t("email", "Validate e-mail addresses",
       "a checkout form", "\"ada@example.org\" and \"ada@\" are entered", "only the first is accepted",
       [DOC + "re.html"],
       "assert shop.valid_email('ada@example.org') and not shop.valid_email('ada@')",
       """
       def valid_email(address):
           return re.fullmatch(r"[^@\\s]+@[^@\\s]+\\.[^@\\s]+", address) is not None
       """,
       "self.assertFalse(shop.valid_email('x'))"),
    _t("mask-card", "Mask card numbers",
       "card number 4111111111111111", "it is shown on the receipt", "only the last four digits are visible",
       [],
       "assert shop.mask_card('4111111111111111') == '**** **** **** 1111', shop.mask_card('4111111111111111')",
       """
       def mask_card(number):
           return "**** **** **** " + number[-4:]
       """,
       "self.assertTrue(shop.mask_card('0000000000001234').endswith('1234'))"),
    _t("luhn", "Reject invalid card numbers",
       "card numbers 4111111111111111 and 4111111111111112", "they are validated",
       "only the first passes the Luhn check",
       ["https://en.wikipedia.org/wiki/Luhn_algorithm"],
       "assert shop.luhn_valid('4111111111111111') and not shop.luhn_valid('4111111111111112')",
       """
       def luhn_valid(number):
           digits = [int(d) for d in number][::-1]
           total = sum(digits[0::2]) + sum(sum(divmod(2 * d, 10)) for d in digits[1::2])
           return total % 10 == 0
       """,
       "self.assertTrue(shop.luhn_valid('0'))"),
    _t("stock", "Show stock status",
       "stock levels 0, 3 and 12", "the product page is rendered",
       "it shows \"out of stock\", \"low stock\" and \"in stock\"",
       [],
       "assert [shop.stock_status(q) for q in (0, 3, 12)] == ['out of stock', 'low stock', 'in stock']",
       """
       def stock_status(qty):
           if qty <= 0:
               return "out of stock"
           return "low stock" if qty < 5 else "in stock"
       """,
       "self.assertEqual(shop.stock_status(100), 'in stock')"),
    _t("rating", "Average product ratings",
       "ratings 4, 5 and 5", "the average is shown", "it is 4.7",
       [],
       "assert shop.review_average([4, 5, 5]) == 4.7 and shop.review_average([]) == 0.0",
       """
       def review_average(ratings):
           return round(sum(ratings) / len(ratings), 1) if ratings else 0.0
       """,
       "self.assertEqual(shop.review_average([3]), 3.0)"),
    _t("stars", "Draw rating stars",
       "an average rating of 3.4", "stars are drawn", "three of five stars are filled",
       [],
       "assert shop.star_bar(3.4) == '★★★☆☆', shop.star_bar(3.4)",
       """
       def star_bar(average):
           filled = int(round(average))
           return "★" * filled + "☆" * (5 - filled)
       """,
       "self.assertEqual(len(shop.star_bar(0)), 5)"),
    _t("summary", "Summarise the order",
       "a cart with 2 mugs", "the order summary is printed", "it lists \"2 x Mug ($8.99)\"",
       [],
       """
       cart = shop.new_cart()
       shop.add_to_cart(cart, shop.make_product('Mug', 899), 2)
       assert shop.order_summary(cart) == ['2 x Mug ($8.99)'], shop.order_summary(cart)
       """,
       """
       def order_summary(cart):
           return [f"{e['qty']} x {product_label(e['product'])}" for e in cart["items"].values()]
       """,
       "self.assertEqual(shop.order_summary(shop.new_cart()), [])"),
    _t("receipt", "Number receipts",
       "order number 42", "a receipt is issued", "its number is \"R-000042\"",
       [],
       "assert shop.receipt_number(42) == 'R-000042', shop.receipt_number(42)",
       """
       def receipt_number(order_id):
           return f"R-{order_id:06d}"
       """,
       "self.assertTrue(shop.receipt_number(1).startswith('R-'))"),
)

assert len(TASKS) == 25

CHECKER = '''\
"""Hidden feature checker: python features.py <task-id>"""
import json
import os
import sys
import traceback

SENTINEL = "##PROFCI## "
HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    task_id = sys.argv[1]
    with open(os.path.join(HERE, "checks.json"), encoding="utf-8") as fh:
        checks = json.load(fh)
    with open(os.path.join(HERE, "manifest.json"), encoding="utf-8") as fh:
        task = next(t for t in json.load(fh)["tasks"] if t["id"] == task_id)
    sys.path.insert(0, os.getcwd())
    status, message = "pass", ""
    try:
        import shop
        exec(checks[task_id], {"shop": shop})
    except AssertionError as exc:
        status, message = "fail", "AssertionError: " + (str(exc) or "assertion failed")
    except AttributeError as exc:
        status, message = "fail", "AttributeError: " + str(exc)
    except Exception:
        status, message = "error", traceback.format_exc(limit=2).strip()
    print("checking", task_id)
    print(SENTINEL + json.dumps({
        "id": task_id, "title": task["title"], "status": status,
        "given": task["given"], "when": task["when"], "then": task["then"],
        "message": message, "hints": task["hints"],
    }))
    return 0 if status == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
'''

STUDENT_SUITE = ["{python}", "-m", "unittest", "discover", "-s", "tests", "-t", ".", "-q"]


def manifest_document(report_endpoint: str | None = None) -> dict:
    return {
        "exercise_name": "Pilot web shop",
        "tasks": [
            {
                "id": t.id,
                "title": t.title,
                "given": t.given,
                "when": t.when,
                "then": t.then,
                "hints": list(t.hints),
                "command": ["{python}", "{hidden_dir}/features.py", t.id],
            }
            for t in TASKS
        ],
        "student_suite_command": STUDENT_SUITE,
        "completion_body_template": (
            "Congratulations, every feature test passes and the exercise is complete.\n\n"
            "Please tell us how it went in the survey: {survey_url}"
        ),
        "survey_url": SURVEY_URL,
        "report_endpoint": report_endpoint,
    }


def pilot_manifest() -> ExerciseManifest:
    return parse_manifest(json.dumps(manifest_document()))


def build_hidden_repo(dest: str | Path, report_endpoint: str | None = None) -> Path:
    """Write the hidden repository; returns the manifest path."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    manifest_path = dest / "manifest.json"
    manifest_path.write_text(json.dumps(manifest_document(report_endpoint), indent=2) + "\n", encoding="utf-8")
    (dest / "checks.json").write_text(
        json.dumps({t.id: t.check for t in TASKS}, indent=2) + "\n", encoding="utf-8"
    )
    (dest / "features.py").write_text(CHECKER, encoding="utf-8")
    return manifest_path


def shop_source(solved: int, heading_fixed: bool) -> str:
    heading = "Shop" if heading_fixed else "Hello World"
    parts = ['"""Student web shop."""', "import re", "", f'HEADING = "{heading}"']
    parts += ["", "\n\n".join(t.solution for t in TASKS[:solved])] if solved else []
    return "\n".join(parts).rstrip() + "\n"


def student_tests_source(solved: int) -> str:
    lines = [
        "import unittest",
        "",
        "import shop",
        "",
        "",
        "class ShopTest(unittest.TestCase):",
        "    def test_heading(self):",
        "        self.assertEqual(shop.HEADING, 'Shop')",
    ]
    for t in TASKS[:solved]:
        lines += ["", f"    def test_{t.id.replace('-', '_')}(self):", f"        {t.student_test}"]
    return "\n".join(lines) + "\n"


def build_workspace(dest: str | Path, solved: int = 0, heading_fixed: bool = True) -> Path:
    """Write (or overwrite) a student workspace with the first ``solved`` features."""
    if not 0 <= solved <= len(TASKS):
        raise ValueError(f"solved must be within 0..{len(TASKS)}")
    dest = Path(dest)
    (dest / "tests").mkdir(parents=True, exist_ok=True)
    (dest / "shop.py").write_text(shop_source(solved, heading_fixed), encoding="utf-8")
    (dest / "tests" / "__init__.py").write_text("", encoding="utf-8")
    (dest / "tests" / "test_shop.py").write_text(student_tests_source(solved), encoding="utf-8")
    return dest
