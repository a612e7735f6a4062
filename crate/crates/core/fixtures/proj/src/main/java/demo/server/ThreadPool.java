package demo.server;

public class ThreadPool {
    private int size;

    public ThreadPool(int size) {
        this.size = size;
    }

    public int size() {
        return size;
    }
}
