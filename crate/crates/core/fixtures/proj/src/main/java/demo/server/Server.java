package demo.server;

import java.util.ArrayList;
import java.util.List;

public class Server {
    private final List<Handler> handlers = new ArrayList<>();
    private int port;

    public Server() {
        this(new ThreadPool(8));
    }

    public Server(ThreadPool pool) {
        this.port = 4567;
    }

    public static Server create(ThreadPool pool, Handler handler) {
        Server server = new Server(pool);
        server.register(handler);
        return server;
    }

    public void register(Handler handler) {
        handlers.add(handler);
    }

    public int ignite(int port) {
        this.port = port;
        return port;
    }
}

class TlsServer extends Server implements Handler {
    TlsServer(ThreadPool pool) {
        super(pool);
    }

    public void handle(String request) {
        ignite(443);
    }
}
