from app.presentation.cli import run

run()
