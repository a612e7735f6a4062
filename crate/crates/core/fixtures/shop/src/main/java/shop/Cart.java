package shop;

import java.util.ArrayList;
import java.util.List;

public class Cart {
    private final List<Item> items = new ArrayList<>();
    private Discount discount;

    public Cart() {
    }

    public void add(Item item) {
        items.add(item);
    }

    public void applyDiscount(Discount discount) {
        this.discount = discount;
    }

    public Money total() {
        Money sum = Money.ZERO;
        for (Item item : items) {
            sum = sum.plus(item.subtotal());
        }
        return discount == null ? sum : discount.apply(sum);
    }

    public int size() {
        return items.size();
    }

    public void clear() {
        items.clear();
    }
}
