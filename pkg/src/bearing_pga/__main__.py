from bearing_pga.cli import run

if __name__ == '__main__':
    run()
