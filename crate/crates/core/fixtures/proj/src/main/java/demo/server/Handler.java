package demo.server;

public interface Handler {
    void handle(String request);
}
