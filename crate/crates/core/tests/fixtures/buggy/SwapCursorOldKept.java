package org.example.feed;

import android.database.Cursor;
import android.util.Log;
import android.widget.SimpleCursorAdapter;

public class SwapCursorOldKept {
    private SimpleCursorAdapter adapter;

    void refresh(Cursor fresh) {
        Cursor old = adapter.swapCursor(fresh); // LEAK: swap_cursor
        if (old != null) {
            Log.d("feed", "replaced " + old.getCount() + " rows");
        }
    }
}
