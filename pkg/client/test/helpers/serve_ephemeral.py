"""Serve on an OS-assigned port and announce it on stdout.

Used by the integration tests to get a throwaway server whose default
environment config comes from OFFTERSIM_CONFIG.
"""

from offtersim import ProtocolServer, config_from_environment


def main():
    server = ProtocolServer(("127.0.0.1", 0), max_envs=8,
                            config=config_from_environment())
    print(f"PORT {server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
