# scripts/render.py
from jinja2 import Environment, FileSystemLoader, select_autoescape
import os

TEMPLATE_DIR = os.path.dirname(os.path.abspath(__file__))


def render_report(docspath, ctx, template="template.html"):
    os.makedirs(docspath, exist_ok=True)
    env = Environment(
        loader=FileSystemLoader(TEMPLATE_DIR),
        autoescape=select_autoescape(["html", "xml"]),
    )
    tpl = env.get_template(template)
    html = tpl.render(**ctx)

    with open(os.path.join(docspath, ".nojekyll"), "w", encoding="utf-8") as f:
        f.write("")
    path = os.path.join(docspath, "index.html")
    with open(path, "w", encoding="utf-8") as f:
        f.write(html)
    return path
