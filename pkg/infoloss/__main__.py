from infoloss.cli.main import run

run()
