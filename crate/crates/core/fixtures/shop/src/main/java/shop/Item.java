package shop;

public class Item {
    private final String name;
    private final Money price;
    private final int quantity;

    public Item(String name, Money price, int quantity) {
        this.name = name;
        this.price = price;
        this.quantity = quantity;
    }

    public Item(String name, Money price) {
        this(name, price, 1);
    }

    public Money subtotal() {
        return price.times(quantity);
    }

    public String name() {
        return name;
    }
}
